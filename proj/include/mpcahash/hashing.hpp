#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "mpcahash/error.hpp"
#include "mpcahash/random.hpp"
#include "mpcahash/tensor.hpp"

namespace mpcahash {

/// Random-hyperplane (sign) LSH: bit b is set iff hyperplane b . v >= 0.
struct HashModel {
    std::size_t dim = 0;
    std::size_t bits = 0;
    std::uint64_t seed = 0;
    Matrix hyperplanes; ///< bits x dim, standard normal, filled row by row from Xoshiro256pp(seed).normal()

    bool operator==(const HashModel&) const = default;
};

/// Packed l-bit code. Bit b lives in words[b / 64] at position b % 64;
/// bits past `bits` are always zero.
struct BinaryCode {
    std::size_t bits = 0;
    std::vector<std::uint64_t> words;

    BinaryCode() = default;
    explicit BinaryCode(std::size_t nbits) : bits(nbits), words(word_count(nbits), 0) {}
    BinaryCode(std::size_t nbits, std::vector<std::uint64_t> w) : bits(nbits), words(std::move(w)) {
        if (words.size() != word_count(bits))
            throw ShapeError("binary code of " + std::to_string(bits) + " bits needs " +
                             std::to_string(word_count(bits)) + " words, got " + std::to_string(words.size()));
        if (bits % 64 != 0 && !words.empty() && (words.back() >> (bits % 64)) != 0)
            throw ArgumentError("binary code has bits set past its length");
    }

    static constexpr std::size_t word_count(std::size_t nbits) noexcept { return (nbits + 63) / 64; }

    [[nodiscard]] bool test(std::size_t b) const noexcept { return (words[b / 64] >> (b % 64)) & 1u; }
    void set(std::size_t b) noexcept { words[b / 64] |= std::uint64_t{1} << (b % 64); }

    bool operator==(const BinaryCode&) const = default;
};

/// Upper bound on bits * dim (hyperplane entries held in memory).
inline constexpr std::size_t max_hash_entries = std::size_t{1} << 26;

inline HashModel fit_hash(std::size_t dim, std::size_t bits, std::uint64_t seed) {
    if (dim < 1 || bits < 1) throw ArgumentError("fit_hash: dim and bits must be at least 1");
    if (dim > max_hash_entries / bits)
        throw CapacityError("fit_hash: " + std::to_string(bits) + " x " + std::to_string(dim) +
                            " hyperplane entries exceed the limit of " + std::to_string(max_hash_entries));
    HashModel model{dim, bits, seed, Matrix(bits, dim)};
    Xoshiro256pp rng(seed);
    for (double& w : model.hyperplanes.data()) w = rng.normal();
    return model;
}

inline BinaryCode encode(const HashModel& model, std::span<const double> v) {
    if (v.size() != model.dim)
        throw ShapeError("encode: vector length " + std::to_string(v.size()) + " != hash dim " +
                         std::to_string(model.dim));
    for (double x : v)
        if (std::isnan(x)) throw ArgumentError("encode: NaN in input vector");
    BinaryCode code(model.bits);
    for (std::size_t b = 0; b < model.bits; ++b) {
        const auto w = model.hyperplanes.row(b);
        double dot = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) dot += w[j] * v[j];
        if (dot >= 0.0) code.set(b);
    }
    return code;
}

inline std::size_t hamming_words(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) noexcept {
    std::size_t d = 0;
    for (std::size_t i = 0; i < words; ++i) d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
    return d;
}

inline std::size_t hamming(const BinaryCode& a, const BinaryCode& b) {
    if (a.bits != b.bits)
        throw ShapeError("hamming: code lengths differ (" + std::to_string(a.bits) + " vs " +
                         std::to_string(b.bits) + ")");
    return hamming_words(a.words.data(), b.words.data(), a.words.size());
}

/// FNV-1a over the little-endian bytes of the hyperplane doubles.
inline std::uint64_t hyperplane_checksum(const HashModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double w : model.hyperplanes.data()) {
        const auto bits = std::bit_cast<std::uint64_t>(w);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace mpcahash
