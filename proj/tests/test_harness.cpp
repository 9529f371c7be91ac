#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snnhdc/errors.hpp"
#include "snnhdc/harness/config.hpp"
#include "snnhdc/harness/experiment.hpp"
#include "snnhdc/harness/synthetic.hpp"
#include "snnhdc/snn/simulate.hpp"

using namespace snnhdc;
using namespace snnhdc::harness;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "schema_version": 1,
  "dataset": {"manifest": "data/manifest.csv", "clip_ms": 40, "dt_ms": 1, "frame_height": 8, "frame_width": 8},
  "padding": "valid",
  "beta": 0.9,
  "seeds": [0],
  "models": [
    {"name": "rate", "decoder": "rate", "arch": "4c3-2p-3"},
    {"name": "latency", "decoder": "latency", "arch": "4c3-2p-3"},
    {"name": "hdc", "decoder": "hdc", "arch": "4c3-2p-D", "dims": 32}
  ],
  "train": {"epochs": 2, "batch_size": 8, "learning_rate": 0.01}
})";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const char* name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SynthConfig small_synth() {
    SynthConfig s;
    s.sensor_size = 8;
    s.duration_ms = 40;
    s.train_per_class = 6;
    s.test_per_class = 3;
    s.seed = 4;
    return s;
}

std::string with(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("config parsing and defaults") {
    const auto cfg = parse_config(kConfig, "/base");
    CHECK(cfg.dataset.manifest == fs::path("/base/data/manifest.csv"));
    CHECK(cfg.models.size() == 3);
    CHECK(cfg.models[2].resolved_arch() == "4c3-2p-32");
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.train.adam_beta2 == 0.999);
    CHECK(cfg.deltas.size() == 7);
    CHECK_FALSE(cfg.delta.has_value());

    const auto again = parse_config(config_to_json(cfg));
    CHECK(again.models[2].dims == 32u);
    CHECK(again.dataset.manifest == cfg.dataset.manifest);
    CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("config errors surface before any compute") {
    const std::string base = kConfig;
    CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"schema_version\": 1", "\"schema_version\": 2")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, ", \"dims\": 32", "")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"4c3-2p-D\"", "\"4c3-2p-16\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"decoder\": \"rate\"", "\"decoder\": \"spike\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"beta\": 0.9", "\"beta\": 1.5")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"beta\": 0.9", "\"beta\": 0.9, \"delta\": 0.7")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"seeds\": [0]", "\"seeds\": []")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"4c3-2p-3\"", "\"4c9-3\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"4c3-2p-3\"", "\"4c3-2p\"")), ConfigError);
    CHECK_THROWS_AS(parse_config(with(base, "\"padding\": \"valid\"", "\"padding\": \"full\"")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("synthetic dataset layout") {
    const auto s = small_synth();
    const auto samples = synth_dataset(s);
    CHECK(samples.size() == 3 * (6 + 3));
    std::size_t test = 0;
    for (const auto& smp : samples) {
        CHECK(smp.stream.sensor_width == 8);
        CHECK(smp.stream.label.has_value());
        CHECK(*smp.stream.label < 3);
        CHECK_FALSE(smp.signer.empty());
        test += smp.split == "test";
        for (const auto& e : smp.stream.events) {
            CHECK(e.x < 8);
            CHECK(e.y < 8);
            CHECK(e.t < 40'000);
        }
        CHECK_FALSE(smp.stream.events.empty());
    }
    CHECK(test == 9);
    const auto again = synth_dataset(s);
    CHECK(again[5].stream.events == samples[5].stream.events);

    auto other = s;
    other.seed = 5;
    CHECK_FALSE(synth_dataset(other)[5].stream.events == samples[5].stream.events);
}

TEST_CASE("synthetic classes are distinguishable by where events fall") {
    SynthConfig s;
    s.classes = 6;
    s.noise_hz = 0.0;
    s.train_per_class = 1;
    s.test_per_class = 0;
    const auto samples = synth_dataset(s);
    // Horizontal sweeps move in x, vertical sweeps in y; compare centroids of
    // the first and last quarter of each stream.
    auto drift = [](const events::EventStream& st, bool along_x) {
        const std::size_t q = st.events.size() / 4;
        double early = 0.0, late = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
            early += along_x ? st.events[i].x : st.events[i].y;
            late += along_x ? st.events[st.events.size() - 1 - i].x : st.events[st.events.size() - 1 - i].y;
        }
        return (late - early) / static_cast<double>(q);
    };
    CHECK(drift(samples[0].stream, true) > 2.0);
    CHECK(drift(samples[1].stream, false) > 2.0);
    CHECK(drift(samples[3].stream, true) < -2.0);
    CHECK(drift(samples[4].stream, false) < -2.0);
}

TEST_CASE("written synthetic data loads back through the manifest") {
    const auto dir = scratch("snnhdc_synth_manifest");
    const auto s = small_synth();
    const auto manifest = write_synth_dataset(s, dir / "data");
    CHECK(fs::exists(manifest));
    CHECK(read_file(manifest).rfind("path,label,signer,split\n", 0) == 0);

    auto cfg = parse_config(kConfig, dir);
    const auto loaded = load_dataset(cfg.dataset);
    const auto direct = dataset_from_synth(s, cfg.dataset);
    CHECK(loaded.classes == 3);
    CHECK(loaded.train.size() == 18);
    CHECK(loaded.test.size() == 9);
    CHECK(loaded.test_ids == direct.test_ids);
    for (std::size_t i = 0; i < loaded.test.size(); ++i) {
        CHECK(loaded.test[i].label == direct.test[i].label);
        CHECK(std::equal(loaded.test[i].frames.data().begin(), loaded.test[i].frames.data().end(),
                         direct.test[i].frames.data().begin()));
    }
    CHECK(loaded.train[0].frames.timesteps() == 40);

    cfg.dataset.frame_height = 4;
    cfg.dataset.frame_width = 4;
    const auto down = load_dataset(cfg.dataset);
    CHECK(down.train[0].frames.height() == 4);
    CHECK(down.train[0].frames.total() == loaded.train[0].frames.total());
    fs::remove_all(dir);
}

TEST_CASE("delta table semantics") {
    const std::vector<OpenSetRecord> records{
        {true, 0, 0, 0.05}, {true, 1, 1, 0.22}, {true, 1, 0, 0.10},  // last one is a wrong nearest class
        {false, 0, 1, 0.12}, {false, 0, 0, 0.30}, {false, 0, 1, 0.45}};
    const std::vector<double> deltas{0.01, 0.1, 0.25, 0.4, 0.5};
    const auto rows = delta_table(records, deltas);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].unknown_accuracy == 1.0);
    CHECK(rows[0].known_accuracy == 0.0);
    CHECK(rows[1].known_accuracy == doctest::Approx(1.0 / 3.0));  // 0.05 < 0.1; 0.10 is not
    CHECK(rows[2].known_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(rows[2].unknown_accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(rows[4].unknown_accuracy == 0.0);
    CHECK(rows[2].full_accuracy == doctest::Approx(4.0 / 6.0));
    CHECK(rows[2].known_samples == 3);
    CHECK(rows[2].unknown_samples == 3);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].unknown_accuracy <= rows[i - 1].unknown_accuracy);
    CHECK(delta_csv(rows).rfind("delta,full_dataset,known_classes,unknown_class", 0) == 0);
}

TEST_CASE("capacity table") {
    const std::vector<double> dims{500, 1000, 2000, 3000, 4000};
    const auto table = capacity_table(dims);
    REQUIRE(table.rows.size() == 5);
    CHECK(table.rows[3].capacity == doctest::Approx(6804).epsilon(0.05));
    for (std::size_t i = 1; i < table.rows.size(); ++i) CHECK(table.rows[i].capacity > table.rows[i - 1].capacity);
    CHECK(table.crossover >= 2583);
    CHECK(table.crossover <= 2683);
    CHECK(table.text().find(std::to_string(table.crossover)) != std::string::npos);
    CHECK(table.csv().rfind("dims,probability,capacity,capacity_log10\n", 0) == 0);
    const std::vector<double> bad{0.5};
    CHECK_THROWS_AS(capacity_table(bad), ValidationError);
}

TEST_CASE("report relative columns and audit") {
    auto cfg = parse_config(kConfig);
    std::vector<ModelReport> models(3);
    const double spikes[] = {300, 200, 100};
    const double sops[] = {3000, 2500, 1000};
    const std::optional<double> latency[] = {30.0, std::nullopt, 10.0};
    for (std::size_t i = 0; i < 3; ++i) {
        models[i].name = cfg.models[i].name;
        models[i].mean_spikes = spikes[i];
        models[i].mean_sops = sops[i];
        models[i].energy_j = sops[i] * snn::kJoulesPerSop;
        models[i].latency_mean_ms = latency[i];
        models[i].latency_sd_ms = latency[i];
    }
    auto report = build_report(cfg, models, {});
    CHECK(report.reference == 2);
    CHECK(report.models[0].relative_spikes == 3.0);
    CHECK(report.models[0].relative_energy == doctest::Approx(3.0));
    CHECK(report.models[0].relative_latency == 3.0);
    CHECK_FALSE(report.models[1].relative_latency.has_value());
    CHECK(report.models[2].relative_spikes == 1.0);
    CHECK_NOTHROW(report.audit());

    auto tampered = report;
    tampered.models[1].relative_spikes = 2.5;
    CHECK_THROWS_AS(tampered.audit(), std::logic_error);
    tampered = report;
    tampered.models[0].energy_j *= 1.01;
    CHECK_THROWS_AS(tampered.audit(), std::logic_error);
    CHECK(report.text().find("normalised to 'hdc'") != std::string::npos);
}

TEST_CASE("end-to-end experiment on a tiny synthetic task") {
    const auto dir = scratch("snnhdc_experiment");
    write_synth_dataset(small_synth(), dir / "data");
    std::ofstream(dir / "config.json") << kConfig;
    const auto cfg = load_config(dir / "config.json");

    const auto report = run_experiment(cfg, dir / "out");
    REQUIRE(report.models.size() == 3);
    CHECK(report.reference == 2);
    CHECK(report.samples.size() == 3 * 9);
    for (const char* f : {"metrics.csv", "per_sample.csv", "report.txt", "series_layers.csv", "history_rate_seed0.csv",
                          "checkpoints/hdc_seed0.snnc", "checkpoints/hdc_seed0.hdcb"}) {
        CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
    }
    for (const auto& m : report.models) {
        CHECK(m.energy_j == m.mean_sops * snn::kJoulesPerSop);
        CHECK(m.seeds.size() == 1);
        std::size_t none = 0;
        for (const auto& s : report.samples)
            if (s.model == m.name && !s.latency_ms) ++none;
        CHECK(m.undecided == none);
        CHECK(m.mean_layer_sops.size() == 2);
    }
    // Layer-1 structure and input are shared, so are layer-1 SOPs.
    CHECK(report.models[0].mean_layer_sops[0] == report.models[1].mean_layer_sops[0]);

    const auto metrics = read_file(dir / "out" / "metrics.csv");
    const auto per_sample = read_file(dir / "out" / "per_sample.csv");
    const auto text = read_file(dir / "out" / "report.txt");
    run_experiment(cfg, dir / "out");
    CHECK(read_file(dir / "out" / "metrics.csv") == metrics);
    CHECK(read_file(dir / "out" / "per_sample.csv") == per_sample);
    CHECK(read_file(dir / "out" / "report.txt") == text);

    // Evaluating saved checkpoints reproduces the same report.
    const auto reloaded = run_experiment(cfg, dir / "out", CheckpointPolicy::require);
    CHECK(reloaded.metrics_csv() == metrics);
    CHECK_THROWS_AS(run_experiment(cfg, dir / "elsewhere", CheckpointPolicy::require), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("delta sweep needs a held-out class") {
    auto cfg = parse_config(kConfig);
    const auto data = dataset_from_synth(small_synth(), cfg.dataset);
    CHECK_THROWS_AS(sweep_delta(cfg, data), ConfigError);
    cfg.known_classes = {0, 1, 2};
    CHECK_THROWS_AS(sweep_delta(cfg, data), ConfigError);
    cfg.known_classes = {0, 7};
    CHECK_THROWS_AS(sweep_delta(cfg, data), ConfigError);
    cfg.known_classes = {0, 2};
    const auto rows = sweep_delta(cfg, data);
    CHECK(rows.size() == cfg.deltas.size());
    CHECK(rows[0].unknown_samples == 3);
    CHECK(rows[0].known_samples == 6);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].unknown_accuracy <= rows[i - 1].unknown_accuracy);
}
