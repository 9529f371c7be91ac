#include "snnhdc/harness/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "snnhdc/errors.hpp"

namespace snnhdc::harness {

using nlohmann::json;

std::string ModelConfig::resolved_arch() const {
    if (!dims) return arch;
    std::string out;
    std::size_t start = 0;
    while (start <= arch.size()) {
        const auto dash = arch.find('-', start);
        const auto token = arch.substr(start, dash == std::string::npos ? std::string::npos : dash - start);
        if (!out.empty()) out += '-';
        out += token == "D" ? std::to_string(*dims) : token;
        if (dash == std::string::npos) break;
        start = dash + 1;
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (schema_version != kConfigSchemaVersion) {
        throw ConfigError(fmt::format("unsupported schema_version {}", schema_version));
    }
    if (dataset.dt_ms == 0 || dataset.clip_ms == 0) throw ConfigError("clip_ms and dt_ms must be positive");
    if (dataset.frame_height == 0 || dataset.frame_width == 0) throw ConfigError("frame size must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (models.empty()) throw ConfigError("at least one model is required");
    if (delta && !(*delta > 0.0 && *delta <= 0.5)) throw ConfigError("delta must lie in (0, 0.5]");
    for (double d : deltas) {
        if (!(d > 0.0 && d <= 0.5)) throw ConfigError("every sweep delta must lie in (0, 0.5]");
    }
    if (train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (!(train.surrogate_slope > 0.0)) throw ConfigError("train.surrogate_slope must be positive");
    for (const auto& m : models) {
        if (m.name.empty()) throw ConfigError("every model needs a name");
        std::vector<snn::LayerSpec> layers;
        try {
            layers = snn::parse_architecture(m.resolved_arch());
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("model '{}': {}", m.name, e.what()));
        }
        try {
            snn::Network(layers, {2, dataset.frame_height, dataset.frame_width}, padding, snn::LIFParams{beta}, 0);
        } catch (const std::runtime_error& e) {
            throw ConfigError(fmt::format("model '{}': {}", m.name, e.what()));
        }
        if (layers.back().kind != snn::LayerKind::dense) {
            throw ConfigError(fmt::format("model '{}' must end in a dense layer", m.name));
        }
        if (m.decoder == train::LossKind::hdc) {
            if (!m.dims) throw ConfigError(fmt::format("hdc model '{}' needs dims", m.name));
            if (layers.back().units != *m.dims) {
                throw ConfigError(fmt::format("hdc model '{}': output width {} != dims {}", m.name,
                                              layers.back().units, *m.dims));
            }
        }
    }
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    ExperimentConfig cfg;
    try {
        cfg.schema_version = doc.at("schema_version").get<int>();
        const auto& ds = doc.at("dataset");
        if (ds.contains("manifest")) {
            std::filesystem::path p = ds.at("manifest").get<std::string>();
            cfg.dataset.manifest = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
        }
        cfg.dataset.clip_ms = ds.value("clip_ms", cfg.dataset.clip_ms);
        cfg.dataset.dt_ms = ds.value("dt_ms", cfg.dataset.dt_ms);
        cfg.dataset.frame_height = ds.value("frame_height", cfg.dataset.frame_height);
        cfg.dataset.frame_width = ds.value("frame_width", cfg.dataset.frame_width);

        cfg.padding = snn::parse_padding(doc.value("padding", std::string("valid")));
        cfg.beta = doc.value("beta", cfg.beta);
        if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        if (doc.contains("codebook_seed")) cfg.codebook_seed = doc.at("codebook_seed").get<std::uint64_t>();
        if (doc.contains("delta") && !doc.at("delta").is_null()) cfg.delta = doc.at("delta").get<double>();
        if (doc.contains("deltas")) cfg.deltas = doc.at("deltas").get<std::vector<double>>();
        if (doc.contains("known_classes")) cfg.known_classes = doc.at("known_classes").get<std::vector<std::size_t>>();

        for (const auto& m : doc.at("models")) {
            ModelConfig mc;
            mc.name = m.at("name").get<std::string>();
            mc.decoder = train::parse_loss_kind(m.at("decoder").get<std::string>());
            mc.arch = m.at("arch").get<std::string>();
            if (m.contains("dims")) mc.dims = m.at("dims").get<std::size_t>();
            cfg.models.push_back(std::move(mc));
        }

        if (doc.contains("train")) {
            const auto& t = doc.at("train");
            auto& tc = cfg.train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            tc.learning_rate = t.value("learning_rate", tc.learning_rate);
            tc.surrogate_slope = t.value("surrogate_slope", tc.surrogate_slope);
            tc.grad_clip = t.value("grad_clip", tc.grad_clip);
            tc.detach_reset = t.value("detach_reset", tc.detach_reset);
            const auto mode = t.value("gradient_mode", std::string("hard"));
            if (mode == "hard") {
                tc.gradient_mode = snn::SpikeMode::hard;
            } else if (mode == "soft") {
                tc.gradient_mode = snn::SpikeMode::soft;
            } else {
                throw ConfigError(fmt::format("unknown gradient_mode '{}'", mode));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config field error: {}", e.what()));
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["schema_version"] = cfg.schema_version;
    doc["dataset"] = {{"manifest", cfg.dataset.manifest.string()},
                      {"clip_ms", cfg.dataset.clip_ms},
                      {"dt_ms", cfg.dataset.dt_ms},
                      {"frame_height", cfg.dataset.frame_height},
                      {"frame_width", cfg.dataset.frame_width}};
    doc["padding"] = std::string(snn::to_string(cfg.padding));
    doc["beta"] = cfg.beta;
    doc["seeds"] = cfg.seeds;
    if (cfg.codebook_seed) doc["codebook_seed"] = *cfg.codebook_seed;
    if (cfg.delta) doc["delta"] = *cfg.delta;
    doc["deltas"] = cfg.deltas;
    if (!cfg.known_classes.empty()) doc["known_classes"] = cfg.known_classes;
    doc["models"] = json::array();
    for (const auto& m : cfg.models) {
        json jm = {{"name", m.name}, {"decoder", std::string(train::to_string(m.decoder))}, {"arch", m.arch}};
        if (m.dims) jm["dims"] = *m.dims;
        doc["models"].push_back(jm);
    }
    const auto& t = cfg.train;
    doc["train"] = {{"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"learning_rate", t.learning_rate},
                    {"surrogate_slope", t.surrogate_slope},
                    {"grad_clip", t.grad_clip},
                    {"detach_reset", t.detach_reset},
                    {"gradient_mode", t.gradient_mode == snn::SpikeMode::hard ? "hard" : "soft"}};
    return doc.dump(2);
}

}  // namespace snnhdc::harness
