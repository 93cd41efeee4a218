// SPDX-License-Identifier: Apache-2.0
//
// Fixed-point reals over encrypted bits. A real r is stored as the w-bit
// two's-complement integer floor(r * 2^f).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gcnn/gates.hpp"

namespace gcnn {

struct FixedPointFormat {
    unsigned total_bits = 32;
    unsigned frac_bits = 16;

    [[nodiscard]] std::int64_t scale() const noexcept { return std::int64_t{1} << frac_bits; }
    [[nodiscard]] double resolution() const noexcept { return 1.0 / static_cast<double>(scale()); }
    [[nodiscard]] std::int64_t min_raw() const noexcept { return -(std::int64_t{1} << (total_bits - 1)); }
    [[nodiscard]] std::int64_t max_raw() const noexcept { return (std::int64_t{1} << (total_bits - 1)) - 1; }

    /// floor(r * scale); throws ErrorKind::Range when outside [min_raw, max_raw].
    [[nodiscard]] std::int64_t quantize(double r) const;
    [[nodiscard]] double to_real(std::int64_t raw) const noexcept;

    void validate() const;
    bool operator==(const FixedPointFormat&) const = default;
};

struct FixedPointCipher {
    BitVector bits;
    FixedPointFormat format;
};

/// Private value: bits go through BitBackend::encrypt.
FixedPointCipher encode(BitBackend& be, double r, const FixedPointFormat& fmt, std::uint64_t seed);
/// Public value: bits are noiseless constants.
FixedPointCipher encode_public(BitBackend& be, double r, const FixedPointFormat& fmt);
FixedPointCipher fp_zero(BitBackend& be, const FixedPointFormat& fmt);

[[nodiscard]] std::int64_t decode_raw(BitBackend& be, const FixedPointCipher& x);
[[nodiscard]] double decode(BitBackend& be, const FixedPointCipher& x);

FixedPointCipher fp_add(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b);
FixedPointCipher fp_sub(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b);
/// floor(z_a * z_b / 2^f), truncated to w bits.
FixedPointCipher fp_mul(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b);
/// fp_mul against the public constant floor(c * 2^f).
FixedPointCipher fp_mul_const(BitBackend& be, const FixedPointCipher& a, double c);

EncBit fp_geq_zero(BitBackend& be, const FixedPointCipher& x);
/// Bit-exactly x or bit-exactly zero.
FixedPointCipher fp_relu(BitBackend& be, const FixedPointCipher& x);
/// Left fold of oblivious pairwise max; ties keep the earlier element.
FixedPointCipher fp_max(BitBackend& be, std::span<const FixedPointCipher> values);

}  // namespace gcnn
