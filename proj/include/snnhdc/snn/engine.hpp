#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "snnhdc/events.hpp"
#include "snnhdc/snn/network.hpp"

namespace snnhdc::snn {

enum class Mode { train, eval };

/// hard: Heaviside spikes with a surrogate derivative in the backward pass.
/// soft: the surrogate's primitive is used in the forward pass too, which
/// makes the whole unrolled graph differentiable (used for gradient checks).
enum class SpikeMode { hard, soft };

/// Arctan surrogate: spike(u) ~ 1/2 + atan(pi/2 * k * (u - 1)) / pi.
double soft_spike(double membrane, double slope);
double surrogate_grad(double membrane, double slope);

struct EngineOptions {
    Mode mode = Mode::eval;
    SpikeMode spikes = SpikeMode::hard;
    double surrogate_slope = 2.0;
    bool detach_reset = false;
    std::uint64_t dropout_seed = 0;
    bool record_tape = true;
    /// Update batchnorm running statistics (train mode only).
    bool update_running_stats = false;
};

/// Everything the backward pass needs from one batched forward run. Arrays
/// are flat, indexed [t][sample][unit].
struct Tape {
    std::size_t timesteps = 0;
    std::size_t batch = 0;

    struct BlockTape {
        std::vector<double> output;      // post pool + dropout, what the next block receives
        std::vector<double> membrane;    // pre-reset membrane U
        std::vector<double> spikes;      // LIF population spikes, pre-pool
        std::vector<double> normalized;  // batchnorm z-hat
        std::vector<double> inv_std;     // [t][channel]
        std::vector<std::uint32_t> pool_arg;
        std::vector<double> dropout_scale;  // [sample][out unit], fixed for the run
    };
    std::vector<double> input;  // HWC frames, [t][sample][unit]
    std::vector<BlockTape> blocks;

    std::span<const double> output(std::size_t block, std::size_t t, std::size_t b,
                                   std::size_t width) const {
        return {blocks[block].output.data() + (t * batch + b) * width, width};
    }
};

struct Gradients {
    struct BlockGrad {
        std::vector<double> weights, bias, bn_gamma, bn_beta;
    };
    std::vector<BlockGrad> blocks;

    static Gradients zeros_like(const Network& net);
    double squared_norm() const;
    void scale(double factor);
};

/// Runs the batched simulation. Frames must all share T and match the
/// network input (2 x H x W). Running statistics are only touched when
/// options.update_running_stats is set, hence the non-const overload.
Tape simulate(const Network& net, std::span<const events::FrameSequence* const> samples,
              const EngineOptions& options);
Tape simulate(Network& net, std::span<const events::FrameSequence* const> samples,
              const EngineOptions& options);

/// Backpropagation through time. output_grad holds dL/d(output of the last
/// block), shape [t][sample][unit]; the returned gradients are summed over
/// the batch.
Gradients backward(const Network& net, const Tape& tape, std::span<const double> output_grad,
                   const EngineOptions& options);

}  // namespace snnhdc::snn
