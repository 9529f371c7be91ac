#include "snnhdc/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"

namespace snnhdc::harness {

namespace {

using events::Event;

/// Emits an event at (x, y) somewhere inside millisecond ms.
void emit(std::vector<Event>& out, Rng& rng, std::uint64_t ms, int x, int y, int size, std::uint8_t pol) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    out.push_back({ms * 1000 + rng.below(1000), static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), pol});
}

}  // namespace

events::EventStream synth_stream(const SynthConfig& cfg, std::size_t cls, std::uint64_t sample_seed) {
    if (cls >= SynthConfig::kMaxClasses || cls >= cfg.classes) {
        throw ValidationError(fmt::format("synthetic class {} out of range", cls));
    }
    Rng rng(sample_seed);
    const int size = cfg.sensor_size;
    events::EventStream s;
    s.sensor_width = cfg.sensor_size;
    s.sensor_height = cfg.sensor_size;
    s.label = static_cast<std::uint32_t>(cls);

    const double speed = size * rng.uniform(0.8, 1.1) / static_cast<double>(cfg.duration_ms);  // px per ms
    const double start = rng.uniform(-3.0, 3.0);
    const int thickness = 3;
    const double cx = size / 2.0 + rng.uniform(-3.0, 3.0);
    const double cy = size / 2.0 + rng.uniform(-3.0, 3.0);
    const int period = 16 + static_cast<int>(rng.below(8));

    auto edge = [&](double p) { return rng.bernoulli(p); };
    for (std::uint64_t ms = 0; ms < cfg.duration_ms; ++ms) {
        const double travelled = start + speed * static_cast<double>(ms);
        switch (cls) {
            case 0:  // bar sweeping right: ON at the leading edge, OFF at the trailing edge
            case 3: {  // bar sweeping left
                const int lead = static_cast<int>(std::floor(travelled));
                const int x_on = cls == 0 ? lead : size - 1 - lead;
                const int x_off = cls == 0 ? lead - thickness : size - 1 - lead + thickness;
                for (int y = 0; y < size; ++y) {
                    if (edge(cfg.edge_probability)) emit(s.events, rng, ms, x_on, y, size, 1);
                    if (edge(cfg.edge_probability)) emit(s.events, rng, ms, x_off, y, size, 0);
                }
                break;
            }
            case 1:  // bar sweeping down
            case 4: {  // bar sweeping up
                const int lead = static_cast<int>(std::floor(travelled));
                const int y_on = cls == 1 ? lead : size - 1 - lead;
                const int y_off = cls == 1 ? lead - thickness : size - 1 - lead + thickness;
                for (int x = 0; x < size; ++x) {
                    if (edge(cfg.edge_probability)) emit(s.events, rng, ms, x, y_on, size, 1);
                    if (edge(cfg.edge_probability)) emit(s.events, rng, ms, x, y_off, size, 0);
                }
                break;
            }
            case 2:  // blinking square
            case 5: {  // blinking ring
                const int phase = static_cast<int>(ms) % period;
                const bool onset = phase < 3;
                const bool offset = phase >= period / 2 && phase < period / 2 + 3;
                if (!onset && !offset) break;
                const int half = 5;
                for (int y = static_cast<int>(cy) - half; y < static_cast<int>(cy) + half; ++y) {
                    for (int x = static_cast<int>(cx) - half; x < static_cast<int>(cx) + half; ++x) {
                        const bool border = y == static_cast<int>(cy) - half || y == static_cast<int>(cy) + half - 1 ||
                                            x == static_cast<int>(cx) - half || x == static_cast<int>(cx) + half - 1;
                        if (cls == 5 && !border) continue;
                        if (edge(cfg.edge_probability)) emit(s.events, rng, ms, x, y, size, onset ? 1 : 0);
                    }
                }
                break;
            }
            default: break;
        }
    }

    // Background noise: independent Poisson process per pixel.
    const double duration_s = static_cast<double>(cfg.duration_ms) / 1000.0;
    if (cfg.noise_hz > 0.0) {
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double t = rng.exponential(cfg.noise_hz);
                while (t < duration_s) {
                    s.events.push_back({static_cast<std::uint64_t>(t * 1e6), static_cast<std::uint16_t>(x),
                                        static_cast<std::uint16_t>(y), static_cast<std::uint8_t>(rng.below(2))});
                    t += rng.exponential(cfg.noise_hz);
                }
            }
        }
    }
    std::stable_sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
    return s;
}

std::vector<SynthSample> synth_dataset(const SynthConfig& cfg) {
    if (cfg.classes < 2 || cfg.classes > SynthConfig::kMaxClasses) {
        throw ValidationError(fmt::format("synthetic classes must be in [2, {}]", SynthConfig::kMaxClasses));
    }
    if (cfg.signers == 0) throw ValidationError("synthetic data needs at least one signer");
    std::vector<SynthSample> out;
    std::uint64_t index = 0;
    for (const char* split : {"train", "test"}) {
        const std::size_t per_class = std::string_view(split) == "train" ? cfg.train_per_class : cfg.test_per_class;
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t c = 0; c < cfg.classes; ++c, ++index) {
                out.push_back({synth_stream(cfg, c, derive_seed(cfg.seed, index)),
                               fmt::format("s{}", index % cfg.signers), split});
            }
        }
    }
    return out;
}

std::filesystem::path write_synth_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto samples = synth_dataset(cfg);
    const auto manifest = dir / "manifest.csv";
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", manifest.string()));
    out << "path,label,signer,split\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto name = fmt::format("sample_{:05d}.evs", i);
        events::write_events(dir / name, samples[i].stream);
        out << fmt::format("{},{},{},{}\n", name, *samples[i].stream.label, samples[i].signer, samples[i].split);
    }
    return manifest;
}

}  // namespace snnhdc::harness
