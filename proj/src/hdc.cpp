#include "snnhdc/hdc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "snnhdc/errors.hpp"
#include "snnhdc/rng.hpp"

namespace snnhdc::hdc {

namespace {

std::size_t word_count(std::size_t dims) { return (dims + 63) / 64; }

void require_same_dims(const BinaryHypervector& a, const BinaryHypervector& b) {
    if (a.dims() != b.dims()) {
        throw ShapeError(fmt::format("hypervector dims differ: {} vs {}", a.dims(), b.dims()));
    }
}

// Beyond this z the erfc route is swapped for the asymptotic series.
constexpr double kAsymptoticZ = 8.0;

}  // namespace

BinaryHypervector::BinaryHypervector(std::size_t dims) : dims_(dims), words_(word_count(dims), 0) {
    if (dims == 0) throw ValidationError("hypervector dims must be >= 1");
}

BinaryHypervector BinaryHypervector::from_bits(std::span<const int> bits) {
    BinaryHypervector hv(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) hv.set(i, bits[i] != 0);
    return hv;
}

void BinaryHypervector::set(std::size_t i, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (i % 64);
    if (value) {
        words_[i / 64] |= mask;
    } else {
        words_[i / 64] &= ~mask;
    }
}

std::size_t BinaryHypervector::popcount() const {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

BinaryHypervector BinaryHypervector::complement() const {
    BinaryHypervector out = *this;
    for (auto& w : out.words_) w = ~w;
    if (dims_ % 64 != 0) out.words_.back() &= (std::uint64_t{1} << (dims_ % 64)) - 1;
    return out;
}

std::string BinaryHypervector::to_hex() const {
    std::string out;
    out.reserve(words_.size() * 16);
    for (auto it = words_.rbegin(); it != words_.rend(); ++it) out += fmt::format("{:016x}", *it);
    return out;
}

BinaryHypervector generate(std::size_t dims, std::uint64_t seed) {
    BinaryHypervector hv(dims);
    Rng rng(seed);
    auto words = hv.words();
    for (auto& w : words) w = rng.next_u64();
    if (dims % 64 != 0) words.back() &= (std::uint64_t{1} << (dims % 64)) - 1;
    return hv;
}

std::size_t hamming(const BinaryHypervector& a, const BinaryHypervector& b) {
    require_same_dims(a, b);
    const auto wa = a.words();
    const auto wb = b.words();
    std::size_t n = 0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
        n += static_cast<std::size_t>(std::popcount(wa[i] ^ wb[i]));
    }
    return n;
}

double normalized_hamming(const BinaryHypervector& a, const BinaryHypervector& b) {
    return static_cast<double>(hamming(a, b)) / static_cast<double>(a.dims());
}

double cosine(const BinaryHypervector& a, const BinaryHypervector& b, CosineMode mode) {
    require_same_dims(a, b);
    if (mode == CosineMode::bipolar) {
        double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
        for (std::size_t i = 0; i < a.dims(); ++i) {
            const double va = a.get(i) ? 1.0 : -1.0;
            const double vb = b.get(i) ? 1.0 : -1.0;
            dot += va * vb;
            norm_a += va * va;
            norm_b += vb * vb;
        }
        return dot / std::sqrt(norm_a * norm_b);
    }
    const auto wa = a.words();
    const auto wb = b.words();
    std::size_t dot = 0;
    for (std::size_t i = 0; i < wa.size(); ++i) {
        dot += static_cast<std::size_t>(std::popcount(wa[i] & wb[i]));
    }
    const auto na = a.popcount();
    const auto nb = b.popcount();
    if (na == 0 || nb == 0) throw MathError("cosine of a zero-norm binary hypervector");
    return static_cast<double>(dot) / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
}

double normal_upper_tail(double z) {
    if (z < kAsymptoticZ) return 0.5 * std::erfc(z / std::numbers::sqrt2);
    return std::exp(log_normal_upper_tail(z));
}

double log_normal_upper_tail(double z) {
    if (z < kAsymptoticZ) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
    // Mills-ratio expansion: Q(z) ~ phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ... + 10395/z^12).
    const double inv2 = 1.0 / (z * z);
    const double series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 + inv2 * (-945.0 + inv2 * 10395.0)))));
    return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log(series);
}

double orthogonality_probability(double dims) {
    if (dims <= 0.0) return 0.0;
    const double z = 0.1 * std::sqrt(dims);
    return 1.0 - 2.0 * normal_upper_tail(z);
}

double log_non_orthogonality(double dims) {
    if (dims <= 0.0) return 0.0;
    return std::log(2.0) + log_normal_upper_tail(0.1 * std::sqrt(dims));
}

double capacity_log10(double dims) {
    const double log_ratio = std::log(8.0) - log_non_orthogonality(dims);  // log(8 / (1-P))
    if (log_ratio < 600.0) {
        const double n = 0.5 * (1.0 + std::sqrt(1.0 + std::exp(log_ratio)));
        return std::log10(n);
    }
    // sqrt(1 + a) + 1 == sqrt(a) to double precision here.
    return (0.5 * log_ratio - std::log(2.0)) / std::numbers::ln10;
}

double capacity(double dims) {
    const double log10_n = capacity_log10(dims);
    if (log10_n > std::log10(std::numeric_limits<double>::max())) {
        return std::numeric_limits<double>::infinity();
    }
    // Small capacities are recomputed directly so the floor sees the exact root.
    const double log_ratio = std::log(8.0) - log_non_orthogonality(dims);
    if (log_ratio < 600.0) {
        return std::floor(0.5 * (1.0 + std::sqrt(1.0 + std::exp(log_ratio))));
    }
    return std::floor(std::pow(10.0, log10_n));
}

std::size_t crossover_dimension(std::size_t max_dims) {
    std::size_t last_below = 0;
    for (std::size_t d = 1; d <= max_dims; ++d) {
        if (capacity(static_cast<double>(d)) < static_cast<double>(d)) last_below = d;
    }
    return last_below + 1;
}

ClassCodebook::ClassCodebook(std::size_t classes, std::size_t dims, std::uint64_t seed)
    : dims_(dims), seed_(seed) {
    if (classes == 0) throw ValidationError("codebook needs at least one class");
    vectors_.reserve(classes);
    for (std::size_t c = 0; c < classes; ++c) vectors_.push_back(generate(dims, derive_seed(seed, c)));
}

ClassCodebook::ClassCodebook(std::vector<BinaryHypervector> vectors, std::uint64_t seed)
    : seed_(seed), vectors_(std::move(vectors)) {
    if (vectors_.empty()) throw ValidationError("codebook needs at least one class");
    dims_ = vectors_.front().dims();
    for (const auto& v : vectors_) {
        if (v.dims() != dims_) throw ShapeError("codebook vectors must share dims");
    }
}

namespace {

constexpr std::uint32_t kCodebookVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t& off) {
    if (off + sizeof(T) > bytes.size()) throw FormatError("codebook file truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(T{bytes[off + i]} << (8 * i));
    off += sizeof(T);
    return value;
}

}  // namespace

std::vector<std::uint8_t> ClassCodebook::serialize() const {
    std::vector<std::uint8_t> out{'H', 'D', 'C', 'B'};
    put(out, kCodebookVersion);
    put(out, static_cast<std::uint32_t>(dims_));
    put(out, static_cast<std::uint32_t>(vectors_.size()));
    put(out, seed_);
    for (const auto& v : vectors_) {
        for (auto w : v.words()) put(out, w);
    }
    return out;
}

ClassCodebook ClassCodebook::parse(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "HDCB")) {
        throw FormatError("missing HDCB header");
    }
    std::size_t off = 4;
    if (get<std::uint32_t>(bytes, off) != kCodebookVersion) throw FormatError("unsupported codebook version");
    const auto dims = get<std::uint32_t>(bytes, off);
    const auto classes = get<std::uint32_t>(bytes, off);
    const auto seed = get<std::uint64_t>(bytes, off);
    std::vector<BinaryHypervector> vectors;
    for (std::uint32_t c = 0; c < classes; ++c) {
        BinaryHypervector v(dims);
        for (auto& w : v.words()) w = get<std::uint64_t>(bytes, off);
        vectors.push_back(std::move(v));
    }
    if (off != bytes.size()) throw FormatError("trailing bytes after codebook rows");
    return ClassCodebook(std::move(vectors), seed);
}

void ClassCodebook::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ClassCodebook ClassCodebook::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(bytes);
}

std::string ClassCodebook::to_hex() const {
    std::string out;
    for (std::size_t c = 0; c < vectors_.size(); ++c) out += fmt::format("{} {}\n", c, vectors_[c].to_hex());
    return out;
}

}  // namespace snnhdc::hdc
