#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace snnhdc::hdc {

/// Fixed-width binary hypervector, bits packed into 64-bit words.
/// Bits beyond dims() in the last word are always zero.
class BinaryHypervector {
public:
    BinaryHypervector() = default;
    explicit BinaryHypervector(std::size_t dims);
    static BinaryHypervector from_bits(std::span<const int> bits);

    std::size_t dims() const { return dims_; }
    bool get(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1u; }
    void set(std::size_t i, bool value);

    std::size_t popcount() const;
    BinaryHypervector complement() const;

    std::span<const std::uint64_t> words() const { return words_; }
    std::span<std::uint64_t> words() { return words_; }

    /// Lowercase hex, most significant word first.
    std::string to_hex() const;

    friend bool operator==(const BinaryHypervector&, const BinaryHypervector&) = default;

private:
    std::size_t dims_ = 0;
    std::vector<std::uint64_t> words_;
};

/// Each bit independently Bernoulli(0.5) from a seeded mt19937_64.
BinaryHypervector generate(std::size_t dims, std::uint64_t seed);

std::size_t hamming(const BinaryHypervector& a, const BinaryHypervector& b);
double normalized_hamming(const BinaryHypervector& a, const BinaryHypervector& b);

enum class CosineMode { binary, bipolar };
double cosine(const BinaryHypervector& a, const BinaryHypervector& b, CosineMode mode);

// Capacity model. A random pair counts as pseudo-orthogonal when its
// normalised Hamming distance lies in 0.5 +/- 0.05; under the normal
// approximation that bound sits at z = 0.1 * sqrt(D).

/// Upper-tail probability Q(z) = 1 - Phi(z) and its natural log. The log
/// form stays finite far past the point where Q underflows.
double normal_upper_tail(double z);
double log_normal_upper_tail(double z);

/// Probability that a random pair is pseudo-orthogonal.
double orthogonality_probability(double dims);
/// log(1 - P), accurate for large D.
double log_non_orthogonality(double dims);

/// Floor of the positive root of (1-P)N^2 - (1-P)N - 2 = 0. Returned as a
/// double so astronomically large capacities remain representable; values
/// beyond double range come back as +inf (use capacity_log10).
double capacity(double dims);
double capacity_log10(double dims);

/// Smallest D after which capacity(D) >= D holds for the rest of the range.
std::size_t crossover_dimension(std::size_t max_dims = 100000);

/// Ordered class codewords sharing one dimensionality.
class ClassCodebook {
public:
    ClassCodebook() = default;
    ClassCodebook(std::size_t classes, std::size_t dims, std::uint64_t seed);
    ClassCodebook(std::vector<BinaryHypervector> vectors, std::uint64_t seed);

    std::size_t size() const { return vectors_.size(); }
    std::size_t dims() const { return dims_; }
    std::uint64_t seed() const { return seed_; }
    const BinaryHypervector& operator[](std::size_t cls) const { return vectors_.at(cls); }
    const std::vector<BinaryHypervector>& vectors() const { return vectors_; }

    // File: "HDCB" u32 version u32 dims u32 classes u64 seed, then packed
    // little-endian u64 rows (ceil(D/64) words per class).
    std::vector<std::uint8_t> serialize() const;
    static ClassCodebook parse(std::span<const std::uint8_t> bytes);
    void save(const std::filesystem::path& path) const;
    static ClassCodebook load(const std::filesystem::path& path);

    /// One "<class> <hex>" line per codeword.
    std::string to_hex() const;

private:
    std::size_t dims_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<BinaryHypervector> vectors_;
};

}  // namespace snnhdc::hdc
