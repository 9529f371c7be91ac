#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snnhdc/harness/config.hpp"
#include "snnhdc/harness/synthetic.hpp"
#include "snnhdc/hdc.hpp"
#include "snnhdc/snn/network.hpp"
#include "snnhdc/train.hpp"

namespace snnhdc::harness {

struct Dataset {
    std::vector<train::LabeledSample> train;
    std::vector<train::LabeledSample> test;
    std::vector<std::string> test_ids;
    std::size_t classes = 0;
};

/// Bins (and block-sums down to the frame size if needed) one stream.
events::FrameSequence prepare_frames(const events::EventStream& stream, const DatasetConfig& cfg);

/// Reads a manifest CSV (path,label[,signer][,split]); rows without a split
/// column or with split "train" go to the training set.
Dataset load_dataset(const DatasetConfig& cfg);
Dataset dataset_from_synth(const SynthConfig& synth, const DatasetConfig& cfg);

struct TrainedModel {
    snn::Network net;
    std::optional<hdc::ClassCodebook> codebook;
    train::TrainHistory history;
};

enum class CheckpointPolicy { train_fresh, reuse_if_present, require };

/// Trains one model for one seed. When known_classes is non-empty only
/// those classes are used, relabelled 0..k-1 in the given order. Weights
/// are round-tripped through the f32 checkpoint encoding before returning
/// so in-memory and reloaded models behave identically.
TrainedModel train_model(const ExperimentConfig& cfg, const ModelConfig& model, std::uint64_t seed,
                         const Dataset& data, std::span<const std::size_t> known_classes = {});

struct SampleRecord {
    std::string model;
    std::uint64_t seed = 0;
    std::string sample_id;
    std::size_t true_class = 0;
    int predicted_class = -1;
    std::optional<double> latency_ms;
    std::optional<double> min_distance;
    std::uint64_t spikes = 0;
    std::vector<std::uint64_t> layer_sops;
};

std::vector<SampleRecord> evaluate_model(const ExperimentConfig& cfg, const ModelConfig& model, std::uint64_t seed,
                                         const TrainedModel& trained, const Dataset& data);

struct SeedMetrics {
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double mean_spikes = 0.0;
    double mean_sops = 0.0;
    double energy_j = 0.0;
    std::optional<double> latency_mean_ms;
    std::optional<double> latency_sd_ms;
    std::size_t undecided = 0;
    std::size_t samples = 0;
};

struct ModelReport {
    std::string name;
    std::string decoder;
    std::string arch;
    std::size_t parameters = 0;
    std::size_t neurons = 0;
    std::vector<SeedMetrics> seeds;

    // Aggregates over seeds; spikes/SOPs/latency pool every test sample.
    double accuracy_mean = 0.0;
    double accuracy_range = 0.0;  // max |seed accuracy - mean|
    double accuracy_sd = 0.0;
    double mean_spikes = 0.0;
    std::vector<double> mean_layer_sops;
    double mean_sops = 0.0;
    double energy_j = 0.0;
    double firing_rate_hz = 0.0;
    std::optional<double> latency_mean_ms;
    std::optional<double> latency_sd_ms;
    std::size_t undecided = 0;

    // Normalised to the reference (HDC) row.
    double relative_spikes = 0.0;
    double relative_energy = 0.0;
    std::optional<double> relative_latency;
};

struct MetricsReport {
    std::vector<ModelReport> models;
    std::size_t reference = 0;
    std::vector<SampleRecord> samples;

    /// Recomputes relative columns and energy from the absolute columns;
    /// throws std::logic_error on any mismatch.
    void audit() const;

    std::string metrics_csv() const;
    std::string per_sample_csv() const;
    std::string layer_series_csv() const;
    std::string text() const;
};

MetricsReport build_report(const ExperimentConfig& cfg, std::vector<ModelReport> models,
                           std::vector<SampleRecord> samples);

/// Trains/loads and evaluates every model for every seed. When out_dir is
/// non-empty, checkpoints, histories and all report files are written there.
MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& data,
                             const std::filesystem::path& out_dir = {},
                             CheckpointPolicy policy = CheckpointPolicy::train_fresh);
MetricsReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {},
                             CheckpointPolicy policy = CheckpointPolicy::train_fresh);

void write_report(const MetricsReport& report, const std::filesystem::path& out_dir);

// Unknown-class detection sweep.

struct OpenSetRecord {
    bool known = true;
    std::size_t true_index = 0;  // index among known classes (unused when unknown)
    int nearest = 0;
    double min_distance = 0.0;
};

struct DeltaRow {
    double delta = 0.0;
    double full_accuracy = 0.0;
    double known_accuracy = 0.0;
    double unknown_accuracy = 0.0;
    std::size_t known_samples = 0;
    std::size_t unknown_samples = 0;
};

/// A known sample is correct when its nearest class matches and the
/// distance is below delta; an unknown one when the distance is >= delta.
std::vector<DeltaRow> delta_table(std::span<const OpenSetRecord> records, std::span<const double> deltas);
std::string delta_csv(std::span<const DeltaRow> rows);

/// Trains the first hdc model on cfg.known_classes and sweeps cfg.deltas.
std::vector<DeltaRow> sweep_delta(const ExperimentConfig& cfg, const Dataset& data,
                                  const std::filesystem::path& out_dir = {});

struct CapacityRow {
    double dims = 0.0;
    double probability = 0.0;
    double capacity = 0.0;
    double capacity_log10 = 0.0;
};

struct CapacityTable {
    std::vector<CapacityRow> rows;
    std::size_t crossover = 0;
    std::string csv() const;
    std::string text() const;
};
CapacityTable capacity_table(std::span<const double> dims);

}  // namespace snnhdc::harness
