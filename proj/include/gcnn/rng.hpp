// SPDX-License-Identifier: Apache-2.0
//
// Deterministic, splittable random source. Every routine that needs
// randomness receives one of these (or a seed to build one) explicitly.

#pragma once

#include <cstdint>
#include <span>

namespace gcnn {

/// SplitMix64 finalizer; also used as a general 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Hash of a sequence of 16-bit words, for content-derived seeds.
std::uint64_t hash_words(std::span<const std::uint16_t> words, std::uint64_t salt) noexcept;

class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) noexcept : state_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Independent child stream keyed by `key`; does not advance this stream.
    [[nodiscard]] constexpr Rng split(std::uint64_t key) const noexcept {
        return Rng(mix64(state_ ^ mix64(key + 0x3c6ef372fe94f82bULL)));
    }

    /// Uniform in [0, 2^bits).
    constexpr std::uint64_t bits(unsigned count) noexcept {
        return count >= 64 ? next() : next() & ((std::uint64_t{1} << count) - 1);
    }

    /// Centered binomial sample in [-eta, eta] with variance eta/2.
    int centered_binomial(unsigned eta) noexcept;

    /// Uniform double in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

}  // namespace gcnn
