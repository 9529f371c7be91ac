#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snnhdc/events.hpp"
#include "snnhdc/hdc.hpp"
#include "snnhdc/snn/engine.hpp"
#include "snnhdc/snn/network.hpp"

namespace snnhdc::train {

enum class LossKind { rate, latency, hdc };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct RateTarget {
    double correct_rate = 0.8;
    double incorrect_rate = 0.2;
};

/// Loss value plus dL/d(output), both for a single sample. Outputs are
/// [T x K] row-major and may be real-valued (soft spikes).
struct LossResult {
    double value = 0.0;
    std::vector<double> grad;
};

/// MSE between per-neuron firing rates (count / T) and 0.8 / 0.2 targets.
LossResult rate_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                     std::size_t true_class, RateTarget target = {});

/// MSE between normalised first-spike times and targets (0 for the true
/// class, 1 for the rest). The first-spike time is evaluated as the
/// expectation sum_t t/(T-1) * S_t * prod_{s<t}(1 - S_s) + prod_s(1 - S_s),
/// which is exactly the first-spike time (1 when silent) on binary trains
/// and smooth on soft ones.
LossResult latency_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                        std::size_t true_class);

/// MSE between the summed spike counts and a class hypervector, with counts
/// above 1 clamped to 1 where the target bit is set (clamped entries pass no
/// gradient).
LossResult hdc_loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                    const hdc::BinaryHypervector& target);

/// Normalised first-spike time per neuron for a binary train (1 if silent).
std::vector<double> first_spike_times(std::span<const double> output, std::size_t timesteps,
                                      std::size_t neurons);

/// What the network is trained against: the loss kind, and for hdc the
/// class codebook.
struct Objective {
    LossKind kind = LossKind::rate;
    std::optional<hdc::ClassCodebook> codebook;

    LossResult loss(std::span<const double> output, std::size_t timesteps, std::size_t neurons,
                    std::size_t true_class) const;
    /// Decoded class of a (binary) output train.
    int predict(std::span<const double> output, std::size_t timesteps, std::size_t neurons) const;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    double surrogate_slope = 2.0;
    snn::SpikeMode gradient_mode = snn::SpikeMode::hard;
    double grad_clip = 10.0;  // global norm; <= 0 disables
    bool detach_reset = false;
};

struct LabeledSample {
    events::FrameSequence frames;
    std::size_t label = 0;
    std::string signer;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> test_accuracy;
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::string to_csv() const;
};

class Adam {
public:
    Adam(const snn::Network& net, const TrainConfig& cfg);
    void step(snn::Network& net, const snn::Gradients& grads);

private:
    TrainConfig cfg_;
    std::size_t steps_ = 0;
    snn::Gradients m_, v_;
};

/// Fraction of samples the objective's decoder gets right (eval mode).
double evaluate_accuracy(const snn::Network& net, std::span<const LabeledSample> data,
                         const Objective& objective, std::size_t batch_size = 32);

/// Surrogate-gradient BPTT with Adam. Throws TrainingError on a non-finite loss.
TrainHistory bptt_train(snn::Network& net, std::span<const LabeledSample> data, const TrainConfig& cfg,
                        const Objective& objective, std::span<const LabeledSample> test = {});

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::vector<double> analytic;
    std::vector<double> numeric;
};

/// Compares soft-mode BPTT gradients with central finite differences over
/// every trainable parameter. Relative error is
/// |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-5;
GradCheckResult soft_gradient_check(const snn::Network& net, const Objective& objective,
                                    const LabeledSample& sample, double step = 1e-5,
                                    double surrogate_slope = 2.0);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Leave-signers-out split: signers are shuffled with the seed and dealt
/// round-robin into K groups; fold i tests on group i.
std::vector<Fold> kfold_split(std::span<const std::string> signers, std::size_t folds, std::uint64_t seed);

}  // namespace snnhdc::train
