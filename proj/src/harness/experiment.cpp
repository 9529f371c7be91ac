#include "snnhdc/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "snnhdc/decoders.hpp"
#include "snnhdc/errors.hpp"
#include "snnhdc/snn/simulate.hpp"

namespace snnhdc::harness {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        cells.push_back(cell);
    }
    return cells;
}

std::string safe_name(const std::string& name) {
    std::string out = name;
    for (auto& c : out) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    }
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
    out << text;
}

std::string opt_num(const std::optional<double>& v, const char* spec = "{:.6g}") {
    return v ? fmt::format(fmt::runtime(spec), *v) : std::string{};
}

struct MeanSd {
    std::optional<double> mean;
    std::optional<double> sd;
};

MeanSd mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return {mean, sd};
}

snn::Shape input_shape(const DatasetConfig& cfg) { return {2, cfg.frame_height, cfg.frame_width}; }

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const ModelConfig& m, std::uint64_t seed,
                                      const char* ext) {
    return dir / "checkpoints" / fmt::format("{}_seed{}.{}", safe_name(m.name), seed, ext);
}

}  // namespace

events::FrameSequence prepare_frames(const events::EventStream& stream, const DatasetConfig& cfg) {
    auto frames = events::bin_to_frames(stream, events::Duration::from_ms(cfg.dt_ms),
                                        events::Duration::from_ms(cfg.clip_ms));
    if (frames.height() != cfg.frame_height || frames.width() != cfg.frame_width) {
        frames = events::downsample(frames, cfg.frame_height, cfg.frame_width);
    }
    return frames;
}

Dataset load_dataset(const DatasetConfig& cfg) {
    std::ifstream in(cfg.manifest);
    if (!in) throw ConfigError(fmt::format("cannot open manifest {}", cfg.manifest.string()));
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("manifest is empty");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    if (!col.contains("path") || !col.contains("label")) throw ConfigError("manifest needs path and label columns");

    Dataset data;
    const auto base = cfg.manifest.parent_path();
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        auto cell = [&](const char* name) -> std::string {
            const auto it = col.find(name);
            return it != col.end() && it->second < cells.size() ? cells[it->second] : std::string{};
        };
        std::filesystem::path path = cell("path");
        if (path.is_relative()) path = base / path;
        const auto stream = events::load_events(path);
        train::LabeledSample sample{prepare_frames(stream, cfg), std::stoul(cell("label")), cell("signer")};
        data.classes = std::max(data.classes, sample.label + 1);
        if (cell("split") == "test") {
            data.test_ids.push_back(path.stem().string());
            data.test.push_back(std::move(sample));
        } else {
            data.train.push_back(std::move(sample));
        }
    }
    return data;
}

Dataset dataset_from_synth(const SynthConfig& synth, const DatasetConfig& cfg) {
    Dataset data;
    data.classes = synth.classes;
    const auto samples = synth_dataset(synth);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        train::LabeledSample ls{prepare_frames(s.stream, cfg), *s.stream.label, s.signer};
        if (s.split == "test") {
            data.test_ids.push_back(fmt::format("sample_{:05d}", i));
            data.test.push_back(std::move(ls));
        } else {
            data.train.push_back(std::move(ls));
        }
    }
    return data;
}

TrainedModel train_model(const ExperimentConfig& cfg, const ModelConfig& model, std::uint64_t seed,
                         const Dataset& data, std::span<const std::size_t> known_classes) {
    std::vector<train::LabeledSample> train_set;
    std::vector<train::LabeledSample> test_set;
    std::size_t classes = data.classes;
    if (known_classes.empty()) {
        train_set = data.train;
        test_set = data.test;
    } else {
        std::map<std::size_t, std::size_t> remap;
        for (std::size_t i = 0; i < known_classes.size(); ++i) remap[known_classes[i]] = i;
        for (const auto* src : {&data.train, &data.test}) {
            for (const auto& s : *src) {
                if (!remap.contains(s.label)) continue;
                auto copy = s;
                copy.label = remap[s.label];
                (src == &data.train ? train_set : test_set).push_back(std::move(copy));
            }
        }
        classes = known_classes.size();
    }
    if (train_set.empty()) throw ConfigError("no training samples for the requested classes");

    TrainedModel tm{snn::Network(model.resolved_arch(), input_shape(cfg.dataset), cfg.padding,
                                 snn::LIFParams{cfg.beta}, seed),
                    std::nullopt,
                    {}};
    train::Objective objective{model.decoder, std::nullopt};
    const std::size_t width = tm.net.output_shape().size();
    if (model.decoder == train::LossKind::hdc) {
        objective.codebook = hdc::ClassCodebook(classes, *model.dims, cfg.codebook_seed.value_or(seed));
        tm.codebook = objective.codebook;
    } else if (width < classes) {
        throw ConfigError(fmt::format("model '{}' has {} outputs for {} classes", model.name, width, classes));
    }
    auto tc = cfg.train;
    tc.seed = seed;
    tm.history = train::bptt_train(tm.net, train_set, tc, objective, test_set);
    tm.net.deserialize(tm.net.serialize());
    return tm;
}

std::vector<SampleRecord> evaluate_model(const ExperimentConfig& cfg, const ModelConfig& model, std::uint64_t seed,
                                         const TrainedModel& trained, const Dataset& data) {
    const auto& net = trained.net;
    const auto fans = snn::all_fan_outs(net);
    const double dt = static_cast<double>(cfg.dataset.dt_ms);
    std::optional<decoders::UnknownPolicy> policy;
    if (cfg.delta && model.decoder == train::LossKind::hdc) policy = decoders::UnknownPolicy(*cfg.delta);

    snn::EngineOptions opt;
    opt.mode = snn::Mode::eval;
    opt.record_tape = false;
    std::vector<SampleRecord> records;
    constexpr std::size_t kBatch = 16;
    for (std::size_t start = 0; start < data.test.size(); start += kBatch) {
        const std::size_t end = std::min(data.test.size(), start + kBatch);
        std::vector<const events::FrameSequence*> batch;
        for (std::size_t i = start; i < end; ++i) batch.push_back(&data.test[i].frames);
        const auto traces = snn::traces_from_tape(net, snn::simulate(net, batch, opt));
        for (std::size_t b = 0; b < traces.size(); ++b) {
            const auto& trace = traces[b];
            const auto& sample = data.test[start + b];
            decoders::DecoderOutput out;
            switch (model.decoder) {
                case train::LossKind::rate: out = decoders::rate_decode(trace.output(), dt); break;
                case train::LossKind::latency: out = decoders::latency_decode(trace.output(), dt); break;
                case train::LossKind::hdc: out = decoders::hdc_decode(trace.output(), *trained.codebook, policy, dt); break;
            }
            SampleRecord rec;
            rec.model = model.name;
            rec.seed = seed;
            rec.sample_id = start + b < data.test_ids.size() ? data.test_ids[start + b] : fmt::format("{}", start + b);
            rec.true_class = sample.label;
            rec.predicted_class = out.predicted_class;
            rec.latency_ms = out.latency_ms;
            rec.min_distance = out.min_distance;
            rec.spikes = trace.total_spikes();
            rec.layer_sops = snn::count_sops(trace, net, fans);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

namespace {

SeedMetrics seed_metrics(std::uint64_t seed, std::span<const SampleRecord> recs) {
    SeedMetrics m;
    m.seed = seed;
    m.samples = recs.size();
    if (recs.empty()) return m;
    std::size_t correct = 0;
    double spikes = 0.0, sops = 0.0;
    std::vector<double> lat;
    for (const auto& r : recs) {
        if (r.predicted_class >= 0 && static_cast<std::size_t>(r.predicted_class) == r.true_class) ++correct;
        spikes += static_cast<double>(r.spikes);
        sops += static_cast<double>(std::accumulate(r.layer_sops.begin(), r.layer_sops.end(), std::uint64_t{0}));
        if (r.latency_ms) {
            lat.push_back(*r.latency_ms);
        } else {
            ++m.undecided;
        }
    }
    const double n = static_cast<double>(recs.size());
    m.accuracy = static_cast<double>(correct) / n;
    m.mean_spikes = spikes / n;
    m.mean_sops = sops / n;
    m.energy_j = snn::estimate_energy(m.mean_sops);
    const auto ls = mean_sd(lat);
    m.latency_mean_ms = ls.mean;
    m.latency_sd_ms = ls.sd;
    return m;
}

ModelReport aggregate(const ExperimentConfig& cfg, const ModelConfig& model, std::span<const SampleRecord> recs,
                      std::vector<SeedMetrics> seeds) {
    ModelReport r;
    r.name = model.name;
    r.decoder = std::string(train::to_string(model.decoder));
    r.arch = model.resolved_arch();
    const snn::Network shape_only(r.arch, input_shape(cfg.dataset), cfg.padding, snn::LIFParams{cfg.beta}, 0);
    r.parameters = snn::count_parameters(shape_only);
    r.neurons = snn::count_neurons(shape_only);
    r.seeds = std::move(seeds);

    std::vector<double> accs;
    for (const auto& s : r.seeds) accs.push_back(s.accuracy);
    const auto acc = mean_sd(accs);
    r.accuracy_mean = acc.mean.value_or(0.0);
    r.accuracy_sd = acc.sd.value_or(0.0);
    for (double a : accs) r.accuracy_range = std::max(r.accuracy_range, std::abs(a - r.accuracy_mean));

    std::vector<double> lat;
    double spikes = 0.0;
    std::size_t layers = recs.empty() ? 0 : recs.front().layer_sops.size();
    r.mean_layer_sops.assign(layers, 0.0);
    for (const auto& s : recs) {
        spikes += static_cast<double>(s.spikes);
        for (std::size_t k = 0; k < layers; ++k) r.mean_layer_sops[k] += static_cast<double>(s.layer_sops[k]);
        if (s.latency_ms) {
            lat.push_back(*s.latency_ms);
        } else {
            ++r.undecided;
        }
    }
    const double n = recs.empty() ? 1.0 : static_cast<double>(recs.size());
    r.mean_spikes = spikes / n;
    for (auto& v : r.mean_layer_sops) v /= n;
    r.mean_sops = std::accumulate(r.mean_layer_sops.begin(), r.mean_layer_sops.end(), 0.0);
    r.energy_j = snn::estimate_energy(r.mean_sops);
    r.firing_rate_hz = snn::firing_rate(r.mean_spikes, r.neurons, static_cast<double>(cfg.dataset.clip_ms) / 1000.0);
    const auto ls = mean_sd(lat);
    r.latency_mean_ms = ls.mean;
    r.latency_sd_ms = ls.sd;
    return r;
}

}  // namespace

MetricsReport build_report(const ExperimentConfig& cfg, std::vector<ModelReport> models,
                           std::vector<SampleRecord> samples) {
    MetricsReport report;
    report.models = std::move(models);
    report.samples = std::move(samples);
    for (std::size_t i = 0; i < cfg.models.size() && i < report.models.size(); ++i) {
        if (cfg.models[i].decoder == train::LossKind::hdc) {
            report.reference = i;
            break;
        }
    }
    const auto& ref = report.models.at(report.reference);
    const double ref_spikes = ref.mean_spikes;
    const double ref_energy = ref.energy_j;
    const auto ref_latency = ref.latency_mean_ms;
    for (auto& m : report.models) {
        m.relative_spikes = m.mean_spikes / ref_spikes;
        m.relative_energy = m.energy_j / ref_energy;
        m.relative_latency.reset();
        if (m.latency_mean_ms && ref_latency) m.relative_latency = *m.latency_mean_ms / *ref_latency;
    }
    report.audit();
    return report;
}

void MetricsReport::audit() const {
    const auto& ref = models.at(reference);
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    for (const auto& m : models) {
        if (!same(m.relative_spikes, m.mean_spikes / ref.mean_spikes) ||
            !same(m.relative_energy, m.energy_j / ref.energy_j)) {
            throw std::logic_error(fmt::format("relative column of '{}' is inconsistent", m.name));
        }
        if (m.relative_latency && !same(*m.relative_latency, *m.latency_mean_ms / *ref.latency_mean_ms)) {
            throw std::logic_error(fmt::format("relative latency of '{}' is inconsistent", m.name));
        }
        if (!same(m.energy_j, m.mean_sops * snn::kJoulesPerSop)) {
            throw std::logic_error(fmt::format("energy of '{}' is not SOPs x 26 pJ", m.name));
        }
    }
}

std::string MetricsReport::metrics_csv() const {
    std::string out =
        "model,decoder,seed,parameters,neurons,accuracy,accuracy_range,accuracy_sd,mean_spikes,relative_spikes,"
        "mean_sops,energy_j,relative_energy,latency_mean_ms,latency_sd_ms,relative_latency,undecided,"
        "firing_rate_hz\n";
    for (const auto& m : models) {
        for (const auto& s : m.seeds) {
            out += fmt::format("{},{},{},{},{},{:.6f},,,{:.6g},,{:.6g},{:.6g},,{},{},,{},\n", m.name, m.decoder, s.seed,
                               m.parameters, m.neurons, s.accuracy, s.mean_spikes, s.mean_sops, s.energy_j,
                               opt_num(s.latency_mean_ms), opt_num(s.latency_sd_ms), s.undecided);
        }
        out += fmt::format("{},{},all,{},{},{:.6f},{:.6f},{:.6f},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{},{},{},{},{:.6g}\n",
                           m.name, m.decoder, m.parameters, m.neurons, m.accuracy_mean, m.accuracy_range,
                           m.accuracy_sd, m.mean_spikes, m.relative_spikes, m.mean_sops, m.energy_j,
                           m.relative_energy, opt_num(m.latency_mean_ms), opt_num(m.latency_sd_ms),
                           opt_num(m.relative_latency), m.undecided, m.firing_rate_hz);
    }
    return out;
}

std::string MetricsReport::per_sample_csv() const {
    std::string out = "model,seed,sample_id,true_class,predicted_class,latency_ms,min_distance,spikes,sops\n";
    for (const auto& r : samples) {
        const auto sops = std::accumulate(r.layer_sops.begin(), r.layer_sops.end(), std::uint64_t{0});
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.model, r.seed, r.sample_id, r.true_class,
                           r.predicted_class < 0 ? std::string("unknown") : std::to_string(r.predicted_class),
                           opt_num(r.latency_ms), opt_num(r.min_distance), r.spikes, sops);
    }
    return out;
}

std::string MetricsReport::layer_series_csv() const {
    std::string out = "model,layer,mean_sops,energy_j\n";
    for (const auto& m : models) {
        for (std::size_t k = 0; k < m.mean_layer_sops.size(); ++k) {
            out += fmt::format("{},{},{:.6g},{:.6g}\n", m.name, k + 1, m.mean_layer_sops[k],
                               snn::estimate_energy(m.mean_layer_sops[k]));
        }
    }
    return out;
}

std::string MetricsReport::text() const {
    std::string out = fmt::format("{:<14} {:>8} {:>22} {:>10} {:>6} {:>11} {:>6} {:>18} {:>6} {:>9}\n", "Model",
                                  "Params", "Accuracy (range/sd)", "Spikes", "Rel", "Energy", "Rel", "Latency (ms)",
                                  "Rel", "Undecided");
    for (const auto& m : models) {
        const auto acc = fmt::format("{:.2f}% ±{:.2f}/{:.2f}", 100.0 * m.accuracy_mean, 100.0 * m.accuracy_range,
                                     100.0 * m.accuracy_sd);
        const auto lat = m.latency_mean_ms ? fmt::format("{:.1f} ± {:.1f}", *m.latency_mean_ms, *m.latency_sd_ms)
                                           : std::string("n/a");
        const auto rel_lat = m.relative_latency ? fmt::format("{:.2f}x", *m.relative_latency) : std::string("n/a");
        out += fmt::format("{:<14} {:>8} {:>22} {:>10.3g} {:>5.2f}x {:>8.3g} mJ {:>5.2f}x {:>18} {:>6} {:>9}\n", m.name,
                           m.parameters, acc, m.mean_spikes, m.relative_spikes, m.energy_j * 1e3, m.relative_energy,
                           lat, rel_lat, m.undecided);
    }
    out += fmt::format("Relative columns are normalised to '{}'. Undecided samples are excluded from latency.\n",
                       models.at(reference).name);
    return out;
}

void write_report(const MetricsReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "metrics.csv", report.metrics_csv());
    write_text(out_dir / "per_sample.csv", report.per_sample_csv());
    write_text(out_dir / "report.txt", report.text());
    write_text(out_dir / "series_layers.csv", report.layer_series_csv());
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const Dataset& data, const std::filesystem::path& out_dir,
                             CheckpointPolicy policy) {
    cfg.validate();
    if (data.test.empty()) throw ConfigError("dataset has no test samples");
    std::vector<ModelReport> models;
    std::vector<SampleRecord> all_samples;
    for (const auto& model : cfg.models) {
        std::vector<SeedMetrics> seeds;
        std::vector<SampleRecord> model_samples;
        for (const auto seed : cfg.seeds) {
            const auto ckpt = checkpoint_path(out_dir, model, seed, "snnc");
            const auto book = checkpoint_path(out_dir, model, seed, "hdcb");
            const bool have = !out_dir.empty() && std::filesystem::exists(ckpt);
            TrainedModel tm;
            if (policy == CheckpointPolicy::require && !have) {
                throw ConfigError(fmt::format("missing checkpoint {}", ckpt.string()));
            }
            if (have && policy != CheckpointPolicy::train_fresh) {
                tm.net = snn::Network(model.resolved_arch(), input_shape(cfg.dataset), cfg.padding,
                                      snn::LIFParams{cfg.beta}, seed);
                tm.net.load(ckpt);
                if (model.decoder == train::LossKind::hdc) tm.codebook = hdc::ClassCodebook::load(book);
            } else {
                tm = train_model(cfg, model, seed, data);
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(ckpt.parent_path());
                    tm.net.save(ckpt);
                    if (tm.codebook) tm.codebook->save(book);
                    write_text(out_dir / fmt::format("history_{}_seed{}.csv", safe_name(model.name), seed),
                               tm.history.to_csv());
                }
            }
            auto recs = evaluate_model(cfg, model, seed, tm, data);
            seeds.push_back(seed_metrics(seed, recs));
            model_samples.insert(model_samples.end(), recs.begin(), recs.end());
        }
        models.push_back(aggregate(cfg, model, model_samples, std::move(seeds)));
        all_samples.insert(all_samples.end(), model_samples.begin(), model_samples.end());
    }
    auto report = build_report(cfg, std::move(models), std::move(all_samples));
    if (!out_dir.empty()) write_report(report, out_dir);
    return report;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             CheckpointPolicy policy) {
    cfg.validate();
    return run_experiment(cfg, load_dataset(cfg.dataset), out_dir, policy);
}

std::vector<DeltaRow> delta_table(std::span<const OpenSetRecord> records, std::span<const double> deltas) {
    std::vector<DeltaRow> rows;
    for (double delta : deltas) {
        DeltaRow row;
        row.delta = delta;
        std::size_t known_ok = 0, unknown_ok = 0;
        for (const auto& r : records) {
            const bool accepted = r.min_distance < delta;
            if (r.known) {
                ++row.known_samples;
                if (accepted && r.nearest >= 0 && static_cast<std::size_t>(r.nearest) == r.true_index) ++known_ok;
            } else {
                ++row.unknown_samples;
                if (!accepted) ++unknown_ok;
            }
        }
        auto frac = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
        row.full_accuracy = frac(known_ok + unknown_ok, records.size());
        row.known_accuracy = frac(known_ok, row.known_samples);
        row.unknown_accuracy = frac(unknown_ok, row.unknown_samples);
        rows.push_back(row);
    }
    return rows;
}

std::string delta_csv(std::span<const DeltaRow> rows) {
    std::string out = "delta,full_dataset,known_classes,unknown_class,known_samples,unknown_samples\n";
    for (const auto& r : rows) {
        out += fmt::format("{:.4g},{:.6f},{:.6f},{:.6f},{},{}\n", r.delta, r.full_accuracy, r.known_accuracy,
                           r.unknown_accuracy, r.known_samples, r.unknown_samples);
    }
    return out;
}

std::vector<DeltaRow> sweep_delta(const ExperimentConfig& cfg, const Dataset& data, const std::filesystem::path& out_dir) {
    cfg.validate();
    const auto model = std::find_if(cfg.models.begin(), cfg.models.end(),
                                    [](const ModelConfig& m) { return m.decoder == train::LossKind::hdc; });
    if (model == cfg.models.end()) throw ConfigError("sweep-delta needs an hdc model");
    if (cfg.known_classes.empty()) throw ConfigError("sweep-delta needs known_classes");
    std::map<std::size_t, std::size_t> remap;
    for (std::size_t i = 0; i < cfg.known_classes.size(); ++i) {
        if (cfg.known_classes[i] >= data.classes) throw ConfigError("known class outside the dataset");
        remap[cfg.known_classes[i]] = i;
    }
    if (remap.size() >= data.classes) throw ConfigError("sweep-delta needs at least one held-out class");

    const auto seed = cfg.seeds.front();
    const auto tm = train_model(cfg, *model, seed, data, cfg.known_classes);

    snn::EngineOptions opt;
    opt.mode = snn::Mode::eval;
    opt.record_tape = false;
    std::vector<OpenSetRecord> records;
    for (const auto& sample : data.test) {
        const events::FrameSequence* batch[] = {&sample.frames};
        const auto trace = std::move(snn::traces_from_tape(tm.net, snn::simulate(tm.net, batch, opt)).front());
        const auto out = decoders::hdc_classify(decoders::hdc_accumulate(trace.output()).final, *tm.codebook);
        OpenSetRecord r;
        r.known = remap.contains(sample.label);
        r.true_index = r.known ? remap[sample.label] : 0;
        r.nearest = out.predicted_class;
        r.min_distance = *out.min_distance;
        records.push_back(r);
    }
    auto rows = delta_table(records, cfg.deltas);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "series_delta.csv", delta_csv(rows));
    }
    return rows;
}

std::string CapacityTable::csv() const {
    std::string out = "dims,probability,capacity,capacity_log10\n";
    for (const auto& r : rows) {
        out += fmt::format("{:.0f},{:.10g},{:.6g},{:.6f}\n", r.dims, r.probability, r.capacity, r.capacity_log10);
    }
    return out;
}

std::string CapacityTable::text() const {
    std::string out = fmt::format("{:>10} {:>16} {:>14}\n", "D", "P(orthogonal)", "classes N");
    for (const auto& r : rows) {
        const auto n = r.capacity_log10 < 15.0 ? fmt::format("{:.0f}", r.capacity) : fmt::format("{:.3g}", std::pow(10.0, r.capacity_log10));
        out += fmt::format("{:>10.0f} {:>16.10f} {:>14}\n", r.dims, r.probability, n);
    }
    out += fmt::format("one-hot / hypervector crossover at D = {}\n", crossover);
    return out;
}

CapacityTable capacity_table(std::span<const double> dims) {
    CapacityTable table;
    for (double d : dims) {
        if (!(d >= 1.0)) throw ValidationError("capacity table dims must be >= 1");
        table.rows.push_back({d, hdc::orthogonality_probability(d), hdc::capacity(d), hdc::capacity_log10(d)});
    }
    table.crossover = hdc::crossover_dimension();
    return table;
}

}  // namespace snnhdc::harness
