#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snnhdc::snn {

enum class LayerKind { conv, maxpool, batchnorm, dropout, dense };
enum class Padding { valid, same };

Padding parse_padding(std::string_view name);
std::string_view to_string(Padding padding);

/// One token of the bracket grammar, e.g. "16c5", "bn", "2p", "0.2d", "1024".
struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t units = 0;   // conv out_channels or dense width
    std::size_t kernel = 0;  // conv kernel size
    std::size_t stride = 1;
    std::size_t window = 0;  // maxpool window (stride equals window)
    double rate = 0.0;       // dropout probability

    /// Conv and dense stages feed a LIF population.
    bool has_lif() const { return kind == LayerKind::conv || kind == LayerKind::dense; }
    std::string token() const;
};

/// Parses "16c5-bn-2p-0.2d-32c5-bn-2p-0.2d-1024" style strings. "25fc" is
/// accepted as a synonym for a dense layer of 25 units.
std::vector<LayerSpec> parse_architecture(std::string_view text);
std::string format_architecture(std::span<const LayerSpec> layers);

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 1;
    std::size_t width = 1;

    std::size_t size() const { return channels * height * width; }
    friend bool operator==(const Shape&, const Shape&) = default;
};

struct LIFParams {
    double beta = 0.9;
    static constexpr double threshold = 1.0;
    static constexpr double reset_value = 0.0;
};

/// A connective stage (conv or dense) plus the stages that ride on it:
/// optional batchnorm on the drive, the LIF population, then optional
/// maxpool and dropout applied to its spikes.
///
/// Activations are laid out HWC: index = (y * W + x) * C + c.
/// Conv weights are [in_c][ky][kx][out_c]; dense weights are [in][out].
struct Block {
    LayerKind kind = LayerKind::dense;
    std::size_t kernel = 0;
    std::size_t pad = 0;
    bool batchnorm = false;
    std::size_t pool = 0;  // 0 = none
    double dropout = 0.0;

    Shape in_shape;
    Shape lif_shape;  // LIF population, pre-pool
    Shape out_shape;  // what the next block sees

    std::vector<double> weights;
    std::vector<double> bias;
    std::vector<double> bn_gamma;
    std::vector<double> bn_beta;
    std::vector<double> bn_mean;
    std::vector<double> bn_var;

    std::size_t out_channels() const { return lif_shape.channels; }
    std::size_t weight_index(std::size_t in_c, std::size_t ky, std::size_t kx, std::size_t out_c) const {
        return ((in_c * kernel + ky) * kernel + kx) * lif_shape.channels + out_c;
    }
};

class Network {
public:
    static constexpr double kBatchNormMomentum = 0.1;
    static constexpr double kBatchNormEps = 1e-5;

    Network() = default;
    /// Builds the block chain and initialises weights uniformly in
    /// +/- sqrt(6 / fan_in); biases start at zero.
    Network(std::vector<LayerSpec> layers, Shape input, Padding padding, LIFParams lif,
            std::uint64_t seed);
    Network(std::string_view architecture, Shape input, Padding padding, LIFParams lif,
            std::uint64_t seed);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    std::vector<Block>& blocks() { return blocks_; }
    Shape input_shape() const { return input_; }
    Shape output_shape() const { return blocks_.back().out_shape; }
    Padding padding() const { return padding_; }
    const LIFParams& lif() const { return lif_; }
    std::uint64_t seed() const { return seed_; }
    std::string architecture() const { return format_architecture(layers_); }

    /// FNV-1a over the architecture string, padding and input shape.
    std::uint64_t arch_hash() const;

    // Checkpoint: "SNNC" u32 version u64 arch_hash f32 beta u64 seed, then
    // per block weights, bias, [gamma, beta, running mean, running var] as
    // little-endian f32.
    void save(const std::filesystem::path& path) const;
    /// Loads into a network already built with the matching architecture.
    void load(const std::filesystem::path& path);
    std::vector<std::uint8_t> serialize() const;
    void deserialize(std::span<const std::uint8_t> bytes);

private:
    std::vector<LayerSpec> layers_;
    std::vector<Block> blocks_;
    Shape input_;
    Padding padding_ = Padding::valid;
    LIFParams lif_;
    std::uint64_t seed_ = 0;
};

std::size_t count_neurons(const Network& net);
std::size_t count_parameters(const Network& net);

}  // namespace snnhdc::snn
