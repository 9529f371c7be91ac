#include "snnhdc/decoders.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"

namespace snnhdc::decoders {

namespace {

constexpr double kRateConfidence = 0.99;

void require_classes(const snn::SpikeTrain& output) {
    if (output.neurons() < 2) throw ValidationError("decoding needs at least two output neurons");
}

int argmax_lowest(const std::vector<double>& values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

double max_softmax(const std::vector<double>& values) {
    const double top = *std::max_element(values.begin(), values.end());
    double denom = 0.0;
    for (double v : values) denom += std::exp(v - top);
    return 1.0 / denom;
}

}  // namespace

UnknownPolicy::UnknownPolicy(double d) : delta(d) {
    if (!(d > 0.0 && d <= 0.5)) throw ValidationError(fmt::format("delta {} outside (0, 0.5]", d));
}

DecoderOutput rate_decode(const snn::SpikeTrain& output, double dt_ms) {
    require_classes(output);
    DecoderOutput out;
    std::vector<double> cumulative(output.neurons(), 0.0);
    out.per_timestep_prediction.reserve(output.timesteps());
    for (std::size_t t = 0; t < output.timesteps(); ++t) {
        const auto row = output.row(t);
        for (std::size_t n = 0; n < row.size(); ++n) cumulative[n] += row[n];
        out.per_timestep_prediction.push_back(argmax_lowest(cumulative));
        if (!out.latency_ms && max_softmax(cumulative) >= kRateConfidence) {
            out.latency_ms = dt_ms * static_cast<double>(t + 1);
        }
    }
    out.predicted_class = argmax_lowest(cumulative);
    return out;
}

DecoderOutput latency_decode(const snn::SpikeTrain& output, double dt_ms) {
    require_classes(output);
    DecoderOutput out;
    out.per_timestep_prediction.reserve(output.timesteps());
    for (std::size_t t = 0; t < output.timesteps(); ++t) {
        if (out.predicted_class == kUnknown) {
            const auto row = output.row(t);
            const auto it = std::find(row.begin(), row.end(), std::uint8_t{1});
            if (it != row.end()) {
                out.predicted_class = static_cast<int>(it - row.begin());
                out.latency_ms = dt_ms * static_cast<double>(t + 1);
            }
        }
        out.per_timestep_prediction.push_back(out.predicted_class);
    }
    return out;
}

Accumulation hdc_accumulate(const snn::SpikeTrain& output) {
    Accumulation acc{hdc::BinaryHypervector(output.neurons()), {}};
    acc.partials.reserve(output.timesteps());
    for (std::size_t t = 0; t < output.timesteps(); ++t) {
        const auto row = output.row(t);
        for (std::size_t n = 0; n < row.size(); ++n) {
            if (row[n]) acc.final.set(n, true);
        }
        acc.partials.push_back(acc.final);
    }
    return acc;
}

DecoderOutput hdc_classify(const hdc::BinaryHypervector& h, const hdc::ClassCodebook& codebook,
                           std::optional<UnknownPolicy> policy) {
    if (h.dims() != codebook.dims()) {
        throw ShapeError(fmt::format("hypervector has {} dims, codebook {}", h.dims(), codebook.dims()));
    }
    DecoderOutput out;
    out.distances.reserve(codebook.size());
    for (const auto& cw : codebook.vectors()) out.distances.push_back(hdc::normalized_hamming(h, cw));
    const auto best = std::min_element(out.distances.begin(), out.distances.end());
    out.min_distance = *best;
    out.predicted_class = static_cast<int>(best - out.distances.begin());
    if (policy && *best >= policy->delta) out.predicted_class = kUnknown;
    out.hypervector = h;
    return out;
}

double hdc_latency(const std::vector<int>& per_timestep_prediction, double dt_ms) {
    if (per_timestep_prediction.empty()) throw ValidationError("hdc_latency needs a non-empty sequence");
    std::size_t settle = per_timestep_prediction.size() - 1;
    while (settle > 0 && per_timestep_prediction[settle - 1] == per_timestep_prediction.back()) --settle;
    return dt_ms * static_cast<double>(settle + 1);
}

DecoderOutput hdc_decode(const snn::SpikeTrain& output, const hdc::ClassCodebook& codebook,
                         std::optional<UnknownPolicy> policy, double dt_ms) {
    auto acc = hdc_accumulate(output);
    DecoderOutput out = hdc_classify(acc.final, codebook, policy);
    out.per_timestep_prediction.reserve(acc.partials.size());
    for (const auto& partial : acc.partials) {
        out.per_timestep_prediction.push_back(hdc_classify(partial, codebook, policy).predicted_class);
    }
    if (!out.per_timestep_prediction.empty()) out.latency_ms = hdc_latency(out.per_timestep_prediction, dt_ms);
    return out;
}

}  // namespace snnhdc::decoders
