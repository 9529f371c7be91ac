#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snnhdc/events.hpp"

namespace snnhdc::harness {

/// Built-in spatiotemporal toy task. Class patterns, in order: bar sweeping
/// right, bar sweeping down, blinking square, bar sweeping left, bar
/// sweeping up, blinking ring. Every sample gets position/speed jitter and
/// Poisson background noise.
struct SynthConfig {
    std::size_t classes = 3;
    std::size_t train_per_class = 30;
    std::size_t test_per_class = 10;
    std::uint16_t sensor_size = 32;
    std::uint64_t duration_ms = 100;
    double noise_hz = 5.0;       // per pixel
    double edge_probability = 0.5;  // per edge pixel per ms
    std::size_t signers = 6;
    std::uint64_t seed = 0;

    static constexpr std::size_t kMaxClasses = 6;
};

struct SynthSample {
    events::EventStream stream;
    std::string signer;
    std::string split;  // "train" or "test"
};

events::EventStream synth_stream(const SynthConfig& cfg, std::size_t cls, std::uint64_t sample_seed);
std::vector<SynthSample> synth_dataset(const SynthConfig& cfg);

/// Writes one EVS1 file per sample plus manifest.csv (path,label,signer,split).
std::filesystem::path write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace snnhdc::harness
