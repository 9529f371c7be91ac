#pragma once

#include <optional>
#include <vector>

#include "snnhdc/hdc.hpp"
#include "snnhdc/snn/simulate.hpp"

namespace snnhdc::decoders {

inline constexpr int kUnknown = -1;

struct DecoderOutput {
    int predicted_class = kUnknown;
    std::optional<double> latency_ms;
    std::vector<int> per_timestep_prediction;

    // HDC only.
    std::optional<hdc::BinaryHypervector> hypervector;
    std::vector<double> distances;
    std::optional<double> min_distance;
};

/// Rejects a match whose normalised Hamming distance is >= delta.
struct UnknownPolicy {
    double delta = 0.25;
    explicit UnknownPolicy(double delta);
};

/// Argmax of spike counts. Latency is the end of the first step at which the
/// softmax of cumulative counts reaches 0.99.
DecoderOutput rate_decode(const snn::SpikeTrain& output, double dt_ms = 1.0);

/// Class of the earliest spike; latency is the end of that step.
DecoderOutput latency_decode(const snn::SpikeTrain& output, double dt_ms = 1.0);

struct Accumulation {
    hdc::BinaryHypervector final;
    std::vector<hdc::BinaryHypervector> partials;  // H(t) for every t
};
/// Bit i of H(t) is set once neuron i has spiked anywhere in [0, t].
Accumulation hdc_accumulate(const snn::SpikeTrain& output);

DecoderOutput hdc_classify(const hdc::BinaryHypervector& h, const hdc::ClassCodebook& codebook,
                           std::optional<UnknownPolicy> policy = std::nullopt);

/// End of the step after which the prediction never changes again.
double hdc_latency(const std::vector<int>& per_timestep_prediction, double dt_ms = 1.0);

/// Full HDC decode: accumulate, classify every partial, settle-time latency.
DecoderOutput hdc_decode(const snn::SpikeTrain& output, const hdc::ClassCodebook& codebook,
                         std::optional<UnknownPolicy> policy = std::nullopt, double dt_ms = 1.0);

}  // namespace snnhdc::decoders
