#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "snnhdc/errors.hpp"
#include "snnhdc/harness/config.hpp"
#include "snnhdc/harness/experiment.hpp"
#include "snnhdc/harness/synthetic.hpp"
#include "snnhdc/train.hpp"

namespace fs = std::filesystem;
using namespace snnhdc;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> decoder;
    std::optional<double> beta;
    std::optional<std::size_t> dims;
    std::optional<double> delta;
    std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool need_config = true) {
    auto* c = cmd->add_option("--config", o.config, "experiment config (JSON)");
    if (need_config) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "run a single seed instead of the configured list");
    cmd->add_option("--decoder", o.decoder, "only run models with this decoder")
        ->check(CLI::IsMember({"rate", "latency", "hdc"}));
    cmd->add_option("--beta", o.beta, "membrane decay factor")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--dims", o.dims, "hypervector dimension for hdc models");
    cmd->add_option("--delta", o.delta, "unknown-class distance threshold")->check(CLI::Range(0.0, 0.5));
    cmd->add_option("--out", o.out, "output directory");
}

harness::ExperimentConfig resolve(const Overrides& o) {
    auto cfg = harness::load_config(o.config);
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.beta) cfg.beta = *o.beta;
    if (o.delta) cfg.delta = *o.delta;
    if (o.decoder) {
        const auto kind = train::parse_loss_kind(*o.decoder);
        std::erase_if(cfg.models, [&](const harness::ModelConfig& m) { return m.decoder != kind; });
        if (cfg.models.empty()) throw ConfigError(fmt::format("no model uses decoder '{}'", *o.decoder));
    }
    if (o.dims) {
        for (auto& m : cfg.models) {
            if (m.decoder == train::LossKind::hdc) m.dims = *o.dims;
        }
    }
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Overrides& o) { return o.out.empty() ? fs::path("out") : fs::path(o.out); }

int run_report(const Overrides& o, harness::CheckpointPolicy policy) {
    const auto cfg = resolve(o);
    const auto report = harness::run_experiment(cfg, out_dir(o), policy);
    fmt::print("{}", report.text());
    fmt::print("wrote {}\n", out_dir(o).string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking network toolkit with hyperdimensional output decoding"};
    app.require_subcommand(1);

    Overrides o;
    auto* train_cmd = app.add_subcommand("train", "train every configured model and write reports");
    add_common(train_cmd, o);
    auto* eval_cmd = app.add_subcommand("eval", "evaluate saved checkpoints (fails if any is missing)");
    add_common(eval_cmd, o);
    auto* report_cmd = app.add_subcommand("report", "evaluate, training only the models without a checkpoint");
    add_common(report_cmd, o);
    auto* delta_cmd = app.add_subcommand("sweep-delta", "train on known_classes and sweep the rejection threshold");
    add_common(delta_cmd, o);

    auto* cap_cmd = app.add_subcommand("capacity", "hypervector class capacity table");
    std::vector<double> cap_dims{1000, 1500, 2000, 2500, 3000, 4148};
    cap_cmd->add_option("dims", cap_dims, "dimensions to tabulate");
    cap_cmd->add_option("--out", o.out, "also write series_capacity.csv here");

    auto* synth_cmd = app.add_subcommand("synth-data", "write the built-in synthetic event dataset");
    harness::SynthConfig synth;
    synth_cmd->add_option("--out", o.out, "destination directory")->required();
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--classes", synth.classes, "number of classes")
        ->check(CLI::Range(std::size_t{2}, harness::SynthConfig::kMaxClasses));
    synth_cmd->add_option("--train-per-class", synth.train_per_class);
    synth_cmd->add_option("--test-per-class", synth.test_per_class);
    synth_cmd->add_option("--size", synth.sensor_size, "sensor width and height");
    synth_cmd->add_option("--duration-ms", synth.duration_ms);
    synth_cmd->add_option("--noise-hz", synth.noise_hz, "background events per pixel per second");

    auto* grad_cmd = app.add_subcommand("gradcheck", "compare BPTT gradients with finite differences");
    add_common(grad_cmd, o);
    double step = 1e-5;
    double tolerance = 1e-4;
    std::size_t samples = 1;
    grad_cmd->add_option("--step", step, "finite-difference step");
    grad_cmd->add_option("--tolerance", tolerance, "maximum relative error");
    grad_cmd->add_option("--samples", samples, "number of training samples to check");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return run_report(o, harness::CheckpointPolicy::train_fresh);
        if (*eval_cmd) return run_report(o, harness::CheckpointPolicy::require);
        if (*report_cmd) return run_report(o, harness::CheckpointPolicy::reuse_if_present);
        if (*delta_cmd) {
            const auto cfg = resolve(o);
            const auto rows = harness::sweep_delta(cfg, harness::load_dataset(cfg.dataset), out_dir(o));
            fmt::print("{}", harness::delta_csv(rows));
            return 0;
        }
        if (*cap_cmd) {
            const auto table = harness::capacity_table(cap_dims);
            fmt::print("{}", table.text());
            if (!o.out.empty()) {
                fs::create_directories(o.out);
                std::ofstream(fs::path(o.out) / "series_capacity.csv", std::ios::binary) << table.csv();
            }
            return 0;
        }
        if (*synth_cmd) {
            const auto manifest = harness::write_synth_dataset(synth, o.out);
            fmt::print("wrote {}\n", manifest.string());
            return 0;
        }
        if (*grad_cmd) {
            const auto cfg = resolve(o);
            const auto data = harness::load_dataset(cfg.dataset);
            int status = 0;
            for (const auto& model : cfg.models) {
                const snn::Network net(model.resolved_arch(), {2, cfg.dataset.frame_height, cfg.dataset.frame_width},
                                       cfg.padding, snn::LIFParams{cfg.beta}, cfg.seeds.front());
                train::Objective objective{model.decoder, std::nullopt};
                if (model.decoder == train::LossKind::hdc) {
                    objective.codebook = hdc::ClassCodebook(data.classes, *model.dims,
                                                            cfg.codebook_seed.value_or(cfg.seeds.front()));
                }
                for (std::size_t i = 0; i < samples && i < data.train.size(); ++i) {
                    const auto r = train::soft_gradient_check(net, objective, data.train[i], step,
                                                              cfg.train.surrogate_slope);
                    const bool ok = r.max_relative_error <= tolerance;
                    fmt::print("{} sample {}: {} parameters, max relative error {:.3e} {}\n", model.name, i,
                               r.analytic.size(), r.max_relative_error, ok ? "ok" : "FAIL");
                    if (!ok) status = 1;
                }
            }
            return status;
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
