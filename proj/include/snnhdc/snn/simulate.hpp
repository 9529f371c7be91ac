#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "snnhdc/events.hpp"
#include "snnhdc/snn/engine.hpp"
#include "snnhdc/snn/network.hpp"

namespace snnhdc::snn {

/// One LIF integration step with hard reset. membrane is updated in place;
/// spikes[i] is set to 1 where the membrane reached threshold.
void lif_step(std::span<double> membrane, std::span<const double> drive, double beta,
              std::span<std::uint8_t> spikes);

/// Binary spike raster [T x neurons].
class SpikeTrain {
public:
    SpikeTrain() = default;
    SpikeTrain(std::size_t timesteps, std::size_t neurons)
        : timesteps_(timesteps), neurons_(neurons), spikes_(timesteps * neurons, 0) {}

    std::size_t timesteps() const { return timesteps_; }
    std::size_t neurons() const { return neurons_; }

    std::uint8_t& at(std::size_t t, std::size_t n) { return spikes_[t * neurons_ + n]; }
    std::uint8_t at(std::size_t t, std::size_t n) const { return spikes_[t * neurons_ + n]; }
    std::span<const std::uint8_t> row(std::size_t t) const { return {spikes_.data() + t * neurons_, neurons_}; }

    std::uint64_t total() const;
    /// Per-neuron spike count over the whole raster.
    std::vector<std::uint64_t> counts() const;

private:
    std::size_t timesteps_ = 0;
    std::size_t neurons_ = 0;
    std::vector<std::uint8_t> spikes_;
};

/// Spiking activity of one sample. layers[k] is the train block k passes on
/// (after pooling and dropout); input_totals[u] is the event count of input
/// unit u (HWC order) summed over all frames.
struct RunTrace {
    std::size_t timesteps = 0;
    std::vector<std::uint64_t> input_totals;
    std::vector<SpikeTrain> layers;

    const SpikeTrain& output() const { return layers.back(); }
    std::vector<std::uint64_t> layer_spike_totals() const;
    std::uint64_t total_spikes() const;
};

/// Simulates one sample. All membranes start at zero; a spike emitted at
/// step t reaches the next block at step t+1 (input frames included).
RunTrace forward(const Network& net, const events::FrameSequence& input, Mode mode = Mode::eval,
                 std::uint64_t dropout_seed = 0);

/// Builds per-sample traces from a batched tape.
std::vector<RunTrace> traces_from_tape(const Network& net, const Tape& tape);

/// Number of non-zero outgoing synapses of every source unit feeding block k.
std::vector<std::uint64_t> fan_out(const Network& net, std::size_t block);

/// fan_out() for every block, in block order.
std::vector<std::vector<std::uint64_t>> all_fan_outs(const Network& net);

/// SOPs attributed to each block (the target of the synapses). Every spike
/// of a source unit costs one SOP per non-zero synapse it drives; input
/// frame counts act as source spikes for the first block.
std::vector<std::uint64_t> count_sops(const RunTrace& trace, const Network& net);
std::vector<std::uint64_t> count_sops(const RunTrace& trace, const Network& net,
                                      const std::vector<std::vector<std::uint64_t>>& fan_outs);

inline constexpr double kJoulesPerSop = 26e-12;

struct EnergyEstimate {
    std::vector<double> per_layer;
    double total = 0.0;
};
EnergyEstimate estimate_energy(std::span<const std::uint64_t> sops);
double estimate_energy(double sops);

struct FiringRates {
    std::vector<double> per_layer;  // Hz
    double overall = 0.0;
};
FiringRates firing_rate(const RunTrace& trace, const Network& net, double duration_s);
double firing_rate(double total_spikes, std::size_t neurons, double duration_s);

}  // namespace snnhdc::snn
