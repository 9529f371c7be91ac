#include "snnhdc/snn/network.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"

namespace snnhdc::snn {

namespace {

std::size_t parse_count(std::string_view text, std::string_view token) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || value == 0) {
        throw ConfigError(fmt::format("bad layer token '{}'", token));
    }
    return value;
}

double parse_rate(std::string_view text, std::string_view token) {
    try {
        std::size_t used = 0;
        const double value = std::stod(std::string(text), &used);
        if (used != text.size()) throw ConfigError("");
        return value;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("bad dropout token '{}'", token));
    }
}

LayerSpec parse_token(std::string_view token) {
    LayerSpec spec;
    if (token == "bn") {
        spec.kind = LayerKind::batchnorm;
        return spec;
    }
    if (token.empty()) throw ConfigError("empty layer token");
    if (token.ends_with("fc")) {
        spec.kind = LayerKind::dense;
        spec.units = parse_count(token.substr(0, token.size() - 2), token);
        return spec;
    }
    switch (token.back()) {
        case 'p':
            spec.kind = LayerKind::maxpool;
            spec.window = parse_count(token.substr(0, token.size() - 1), token);
            return spec;
        case 'd':
            spec.kind = LayerKind::dropout;
            spec.rate = parse_rate(token.substr(0, token.size() - 1), token);
            if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
                throw ConfigError(fmt::format("dropout rate in '{}' must be in [0, 1)", token));
            }
            return spec;
        default:
            break;
    }
    if (const auto c = token.find('c'); c != std::string_view::npos) {
        spec.kind = LayerKind::conv;
        spec.units = parse_count(token.substr(0, c), token);
        spec.kernel = parse_count(token.substr(c + 1), token);
        return spec;
    }
    spec.kind = LayerKind::dense;
    spec.units = parse_count(token, token);
    return spec;
}

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint64_t take(std::size_t n) {
        if (off_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{bytes_[off_ + i]} << (8 * i);
        off_ += n;
        return v;
    }
    double f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(take(4))); }
    bool done() const { return off_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t off_ = 0;
};

}  // namespace

Padding parse_padding(std::string_view name) {
    if (name == "valid") return Padding::valid;
    if (name == "same") return Padding::same;
    throw ConfigError(fmt::format("unknown padding mode '{}'", name));
}

std::string_view to_string(Padding padding) { return padding == Padding::valid ? "valid" : "same"; }

std::string LayerSpec::token() const {
    switch (kind) {
        case LayerKind::conv: return fmt::format("{}c{}", units, kernel);
        case LayerKind::maxpool: return fmt::format("{}p", window);
        case LayerKind::batchnorm: return "bn";
        case LayerKind::dropout: return fmt::format("{:g}d", rate);
        case LayerKind::dense: return fmt::format("{}", units);
    }
    return {};
}

std::vector<LayerSpec> parse_architecture(std::string_view text) {
    std::vector<LayerSpec> layers;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto dash = text.find('-', start);
        const auto token = text.substr(start, dash == std::string_view::npos ? text.npos : dash - start);
        layers.push_back(parse_token(token));
        if (dash == std::string_view::npos) break;
        start = dash + 1;
    }
    return layers;
}

std::string format_architecture(std::span<const LayerSpec> layers) {
    std::string out;
    for (const auto& l : layers) {
        if (!out.empty()) out += '-';
        out += l.token();
    }
    return out;
}

Network::Network(std::string_view architecture, Shape input, Padding padding, LIFParams lif,
                 std::uint64_t seed)
    : Network(parse_architecture(architecture), input, padding, lif, seed) {}

Network::Network(std::vector<LayerSpec> layers, Shape input, Padding padding, LIFParams lif,
                 std::uint64_t seed)
    : layers_(std::move(layers)), input_(input), padding_(padding), lif_(lif), seed_(seed) {
    if (!(lif.beta >= 0.0 && lif.beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (input.size() == 0) throw ShapeError("input shape must be non-empty");

    Shape current = input;
    for (const auto& spec : layers_) {
        switch (spec.kind) {
            case LayerKind::conv: {
                if (!blocks_.empty() && blocks_.back().kind == LayerKind::dense) {
                    throw ShapeError("conv cannot follow a dense layer");
                }
                Block b;
                b.kind = LayerKind::conv;
                b.kernel = spec.kernel;
                b.in_shape = current;
                if (padding_ == Padding::same) {
                    if (spec.kernel % 2 == 0) throw ShapeError("same padding needs an odd kernel");
                    b.pad = spec.kernel / 2;
                    b.lif_shape = {spec.units, current.height, current.width};
                } else {
                    if (spec.kernel > current.height || spec.kernel > current.width) {
                        throw ShapeError(fmt::format("kernel {} larger than {}x{} input", spec.kernel,
                                                     current.height, current.width));
                    }
                    b.lif_shape = {spec.units, current.height - spec.kernel + 1,
                                   current.width - spec.kernel + 1};
                }
                b.out_shape = b.lif_shape;
                blocks_.push_back(std::move(b));
                break;
            }
            case LayerKind::dense: {
                Block b;
                b.kind = LayerKind::dense;
                b.in_shape = {current.size(), 1, 1};
                b.lif_shape = {spec.units, 1, 1};
                b.out_shape = b.lif_shape;
                blocks_.push_back(std::move(b));
                break;
            }
            case LayerKind::batchnorm: {
                if (blocks_.empty() || blocks_.back().batchnorm || blocks_.back().pool != 0 ||
                    blocks_.back().dropout > 0.0) {
                    throw ConfigError("bn must directly follow a conv or dense layer");
                }
                blocks_.back().batchnorm = true;
                break;
            }
            case LayerKind::maxpool: {
                if (blocks_.empty() || blocks_.back().pool != 0 || blocks_.back().dropout > 0.0) {
                    throw ConfigError("maxpool must follow a conv block");
                }
                auto& b = blocks_.back();
                if (spec.window > b.lif_shape.height || spec.window > b.lif_shape.width) {
                    throw ShapeError("pool window larger than its input");
                }
                b.pool = spec.window;
                b.out_shape = {b.lif_shape.channels, b.lif_shape.height / spec.window,
                               b.lif_shape.width / spec.window};
                break;
            }
            case LayerKind::dropout: {
                if (blocks_.empty() || blocks_.back().dropout > 0.0) {
                    throw ConfigError("dropout must follow a layer");
                }
                blocks_.back().dropout = spec.rate;
                break;
            }
        }
        if (!blocks_.empty()) current = blocks_.back().out_shape;
    }
    if (blocks_.empty()) throw ConfigError("architecture has no conv or dense layer");

    Rng rng(seed_);
    for (auto& b : blocks_) {
        const std::size_t out = b.out_channels();
        const std::size_t fan_in =
            b.kind == LayerKind::conv ? b.in_shape.channels * b.kernel * b.kernel : b.in_shape.size();
        const std::size_t n_weights = fan_in * out;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        b.weights.resize(n_weights);
        for (auto& w : b.weights) w = rng.uniform(-bound, bound);
        b.bias.assign(out, 0.0);
        if (b.batchnorm) {
            b.bn_gamma.assign(out, 1.0);
            b.bn_beta.assign(out, 0.0);
            b.bn_mean.assign(out, 0.0);
            b.bn_var.assign(out, 1.0);
        }
    }
}

std::uint64_t Network::arch_hash() const {
    const auto text = fmt::format("{}|{}|{}x{}x{}", architecture(), to_string(padding_),
                                  input_.channels, input_.height, input_.width);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> Network::serialize() const {
    std::vector<std::uint8_t> out{'S', 'N', 'N', 'C'};
    put_u32(out, kCheckpointVersion);
    put_u64(out, arch_hash());
    put_f32(out, lif_.beta);
    put_u64(out, seed_);
    for (const auto& b : blocks_) {
        for (double w : b.weights) put_f32(out, w);
        for (double w : b.bias) put_f32(out, w);
        if (b.batchnorm) {
            for (const auto* v : {&b.bn_gamma, &b.bn_beta, &b.bn_mean, &b.bn_var}) {
                for (double w : *v) put_f32(out, w);
            }
        }
    }
    return out;
}

void Network::deserialize(std::span<const std::uint8_t> bytes) {
    Reader in(bytes);
    if (in.take(4) != 0x434E4E53u) throw FormatError("missing SNNC header");
    if (in.take(4) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
    if (in.take(8) != arch_hash()) throw FormatError("checkpoint architecture does not match network");
    lif_.beta = in.f32();
    seed_ = in.take(8);
    for (auto& b : blocks_) {
        for (auto& w : b.weights) w = in.f32();
        for (auto& w : b.bias) w = in.f32();
        if (b.batchnorm) {
            for (auto* v : {&b.bn_gamma, &b.bn_beta, &b.bn_mean, &b.bn_var}) {
                for (auto& w : *v) w = in.f32();
            }
        }
    }
    if (!in.done()) throw FormatError("trailing bytes in checkpoint");
}

void Network::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void Network::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    deserialize(bytes);
}

std::size_t count_neurons(const Network& net) {
    std::size_t n = 0;
    for (const auto& b : net.blocks()) n += b.out_shape.size();
    return n;
}

std::size_t count_parameters(const Network& net) {
    std::size_t n = 0;
    for (const auto& b : net.blocks()) n += b.weights.size() + b.bias.size();
    return n;
}

}  // namespace snnhdc::snn
