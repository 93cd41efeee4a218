// SPDX-License-Identifier: Apache-2.0
//
// Boolean toolkit built only from BitBackend::nand and BitBackend::constant.
// Every circuit's gate sequence depends on operand widths alone.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gcnn/backend.hpp"

namespace gcnn {

/// Two's-complement bit vector, index 0 least significant.
struct BitVector {
    std::vector<EncBit> bits;

    BitVector() = default;
    explicit BitVector(std::vector<EncBit> b) : bits(std::move(b)) {}

    [[nodiscard]] std::size_t width() const noexcept { return bits.size(); }
    [[nodiscard]] const EncBit& operator[](std::size_t i) const { return bits[i]; }
    [[nodiscard]] const EncBit& sign() const { return bits.back(); }
};

struct CompareResult {
    EncBit is_negative;  // a < b
    EncBit is_zero;      // a == b
};

struct WallaceReport {
    unsigned levels = 0;             // 3:2 compression levels
    std::size_t full_adders = 0;     // compressors in the tree
    std::size_t partial_products = 0;
};

EncBit not_gate(BitBackend& be, const EncBit& a);
EncBit and_gate(BitBackend& be, const EncBit& a, const EncBit& b);
EncBit or_gate(BitBackend& be, const EncBit& a, const EncBit& b);
EncBit xor_gate(BitBackend& be, const EncBit& a, const EncBit& b);

struct AdderBits {
    EncBit sum;
    EncBit carry;
};

AdderBits half_adder(BitBackend& be, const EncBit& a, const EncBit& b);
/// Nine NANDs.
AdderBits full_adder(BitBackend& be, const EncBit& a, const EncBit& b, const EncBit& cin);

/// Ripple-carry sum modulo 2^width.
BitVector add(BitBackend& be, const BitVector& a, const BitVector& b);
/// a + ~b + 1 modulo 2^width.
BitVector sub(BitBackend& be, const BitVector& a, const BitVector& b);

/// Full 2w-bit signed product; partial products reduced by a Wallace tree of
/// full adders, final row pair summed by a ripple-carry adder.
BitVector mul_wallace(BitBackend& be, const BitVector& a, const BitVector& b, WallaceReport* report = nullptr);

/// Reference circuit: sign-extended shift-and-add rows summed one by one.
BitVector mul_schoolbook(BitBackend& be, const BitVector& a, const BitVector& b);

/// Requires |a - b| < 2^(w-1); the sign of the difference is otherwise wrong.
CompareResult compare(BitBackend& be, const BitVector& a, const BitVector& b);
/// Sign bit of a - b (compare() without the zero test).
EncBit less_than(BitBackend& be, const BitVector& a, const BitVector& b);

/// Per bit (sel & on_true) | (!sel & on_false).
BitVector mux(BitBackend& be, const EncBit& sel, const BitVector& on_true, const BitVector& on_false);

/// Levels a Wallace tree needs for a w x w product (no gates evaluated).
unsigned wallace_levels(std::size_t width);

// Helpers for moving between integers and bit vectors.
BitVector constant_vector(BitBackend& be, std::int64_t value, std::size_t width);
BitVector encrypt_vector(BitBackend& be, std::int64_t value, std::size_t width, std::uint64_t seed);
/// Two's-complement value of the decrypted bits (width <= 64).
std::int64_t decrypt_vector(BitBackend& be, const BitVector& v);

}  // namespace gcnn
