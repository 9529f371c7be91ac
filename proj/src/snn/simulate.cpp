#include "snnhdc/snn/simulate.hpp"

#include <cmath>
#include <numeric>

#include "snnhdc/errors.hpp"

namespace snnhdc::snn {

void lif_step(std::span<double> membrane, std::span<const double> drive, double beta,
              std::span<std::uint8_t> spikes) {
    if (membrane.size() != drive.size() || membrane.size() != spikes.size()) {
        throw ShapeError("lif_step: membrane, drive and spike sizes differ");
    }
    for (std::size_t i = 0; i < membrane.size(); ++i) {
        if (!std::isfinite(drive[i])) throw MathError("lif_step: non-finite drive");
        const double u = beta * membrane[i] + drive[i];
        const bool fire = u >= LIFParams::threshold;
        spikes[i] = fire ? 1 : 0;
        membrane[i] = fire ? LIFParams::reset_value : u;
    }
}

std::uint64_t SpikeTrain::total() const {
    return std::accumulate(spikes_.begin(), spikes_.end(), std::uint64_t{0});
}

std::vector<std::uint64_t> SpikeTrain::counts() const {
    std::vector<std::uint64_t> c(neurons_, 0);
    for (std::size_t t = 0; t < timesteps_; ++t) {
        for (std::size_t n = 0; n < neurons_; ++n) c[n] += at(t, n);
    }
    return c;
}

std::vector<std::uint64_t> RunTrace::layer_spike_totals() const {
    std::vector<std::uint64_t> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.total());
    return out;
}

std::uint64_t RunTrace::total_spikes() const {
    std::uint64_t n = 0;
    for (const auto& l : layers) n += l.total();
    return n;
}

std::vector<RunTrace> traces_from_tape(const Network& net, const Tape& tape) {
    const std::size_t B = tape.batch;
    const std::size_t T = tape.timesteps;
    const std::size_t in_size = net.input_shape().size();
    std::vector<RunTrace> traces(B);
    for (std::size_t b = 0; b < B; ++b) {
        auto& tr = traces[b];
        tr.timesteps = T;
        tr.input_totals.assign(in_size, 0);
        for (std::size_t t = 0; t < T; ++t) {
            const double* x = tape.input.data() + (t * B + b) * in_size;
            for (std::size_t i = 0; i < in_size; ++i) tr.input_totals[i] += static_cast<std::uint64_t>(x[i]);
        }
        for (std::size_t k = 0; k < net.blocks().size(); ++k) {
            const std::size_t out = net.blocks()[k].out_shape.size();
            SpikeTrain train(T, out);
            for (std::size_t t = 0; t < T; ++t) {
                const auto row = tape.output(k, t, b, out);
                for (std::size_t i = 0; i < out; ++i) train.at(t, i) = row[i] != 0.0 ? 1 : 0;
            }
            tr.layers.push_back(std::move(train));
        }
    }
    return traces;
}

RunTrace forward(const Network& net, const events::FrameSequence& input, Mode mode,
                 std::uint64_t dropout_seed) {
    EngineOptions opt;
    opt.mode = mode;
    opt.record_tape = false;
    opt.dropout_seed = dropout_seed;
    const events::FrameSequence* samples[] = {&input};
    const Tape tape = simulate(net, samples, opt);
    return std::move(traces_from_tape(net, tape).front());
}

std::vector<std::uint64_t> fan_out(const Network& net, std::size_t block) {
    const auto& blk = net.blocks().at(block);
    const std::size_t oc = blk.out_channels();
    const auto& in = blk.in_shape;
    std::vector<std::uint64_t> fan(in.size(), 0);
    if (blk.kind == LayerKind::dense) {
        for (std::size_t j = 0; j < in.size(); ++j) {
            for (std::size_t o = 0; o < oc; ++o) fan[j] += blk.weights[j * oc + o] != 0.0;
        }
        return fan;
    }
    const auto& out = blk.lif_shape;
    for (std::size_t y = 0; y < in.height; ++y) {
        for (std::size_t x = 0; x < in.width; ++x) {
            for (std::size_t c = 0; c < in.channels; ++c) {
                std::uint64_t n = 0;
                for (std::size_t ky = 0; ky < blk.kernel; ++ky) {
                    const auto oy = static_cast<std::ptrdiff_t>(y + blk.pad) - static_cast<std::ptrdiff_t>(ky);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(out.height)) continue;
                    for (std::size_t kx = 0; kx < blk.kernel; ++kx) {
                        const auto ox = static_cast<std::ptrdiff_t>(x + blk.pad) - static_cast<std::ptrdiff_t>(kx);
                        if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(out.width)) continue;
                        for (std::size_t o = 0; o < oc; ++o) n += blk.weights[blk.weight_index(c, ky, kx, o)] != 0.0;
                    }
                }
                fan[(y * in.width + x) * in.channels + c] = n;
            }
        }
    }
    return fan;
}

std::vector<std::vector<std::uint64_t>> all_fan_outs(const Network& net) {
    std::vector<std::vector<std::uint64_t>> out;
    for (std::size_t k = 0; k < net.blocks().size(); ++k) out.push_back(fan_out(net, k));
    return out;
}

std::vector<std::uint64_t> count_sops(const RunTrace& trace, const Network& net) {
    return count_sops(trace, net, all_fan_outs(net));
}

std::vector<std::uint64_t> count_sops(const RunTrace& trace, const Network& net,
                                      const std::vector<std::vector<std::uint64_t>>& fan_outs) {
    const auto& blocks = net.blocks();
    if (trace.layers.size() != blocks.size() || trace.input_totals.size() != net.input_shape().size() ||
        fan_outs.size() != blocks.size()) {
        throw ShapeError("trace was not produced by this network");
    }
    std::vector<std::uint64_t> sops(blocks.size(), 0);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& fan = fan_outs[k];
        const auto source = k == 0 ? trace.input_totals : trace.layers[k - 1].counts();
        for (std::size_t u = 0; u < fan.size(); ++u) sops[k] += fan[u] * source[u];
    }
    return sops;
}

EnergyEstimate estimate_energy(std::span<const std::uint64_t> sops) {
    EnergyEstimate e;
    for (auto s : sops) {
        e.per_layer.push_back(static_cast<double>(s) * kJoulesPerSop);
    }
    const auto total = std::accumulate(sops.begin(), sops.end(), std::uint64_t{0});
    e.total = static_cast<double>(total) * kJoulesPerSop;
    return e;
}

double estimate_energy(double sops) { return sops * kJoulesPerSop; }

double firing_rate(double total_spikes, std::size_t neurons, double duration_s) {
    if (!(duration_s > 0.0)) throw ValidationError("firing_rate: duration must be positive");
    if (neurons == 0) return 0.0;
    return total_spikes / (static_cast<double>(neurons) * duration_s);
}

FiringRates firing_rate(const RunTrace& trace, const Network& net, double duration_s) {
    FiringRates r;
    for (std::size_t k = 0; k < trace.layers.size(); ++k) {
        r.per_layer.push_back(firing_rate(static_cast<double>(trace.layers[k].total()),
                                          net.blocks()[k].out_shape.size(), duration_s));
    }
    r.overall = firing_rate(static_cast<double>(trace.total_spikes()), count_neurons(net), duration_s);
    return r;
}

}  // namespace snnhdc::snn
