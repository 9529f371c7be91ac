#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "snnhdc/snn/network.hpp"
#include "snnhdc/train.hpp"

namespace snnhdc::harness {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetConfig {
    std::filesystem::path manifest;  // CSV: path,label[,signer][,split]
    std::uint64_t clip_ms = 1500;
    std::uint64_t dt_ms = 1;
    std::size_t frame_height = 32;
    std::size_t frame_width = 32;
};

struct ModelConfig {
    std::string name;
    train::LossKind decoder = train::LossKind::rate;
    /// Bracket grammar; a trailing or embedded "D" token is replaced by dims.
    std::string arch;
    std::optional<std::size_t> dims;

    std::string resolved_arch() const;
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    DatasetConfig dataset;
    snn::Padding padding = snn::Padding::valid;
    double beta = 0.9;
    std::vector<std::uint64_t> seeds{0};
    std::optional<std::uint64_t> codebook_seed;  // defaults to the run seed
    std::vector<ModelConfig> models;
    std::optional<double> delta;
    std::vector<double> deltas{0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
    std::vector<std::size_t> known_classes;  // sweep-delta training subset
    train::TrainConfig train;

    /// Throws ConfigError on any inconsistency.
    void validate() const;
};

/// Parses the JSON document; relative dataset paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace snnhdc::harness
