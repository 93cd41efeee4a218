// SPDX-License-Identifier: Apache-2.0

#include "gcnn/gates.hpp"

#include <algorithm>

#include "gcnn/error.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

namespace {

void require_same_width(const BitVector& a, const BitVector& b, const char* op) {
    if (a.width() != b.width() || a.width() == 0)
        fail(ErrorKind::Usage, std::string(op) + ": operand widths differ (" + std::to_string(a.width()) + " vs " +
                                   std::to_string(b.width()) + ")");
}

// Ripple-carry sum with an explicit carry-in; the final carry is dropped.
BitVector ripple(BitBackend& be, const BitVector& a, const BitVector& b, EncBit carry) {
    std::vector<EncBit> out;
    out.reserve(a.width());
    for (std::size_t i = 0; i < a.width(); ++i) {
        auto [sum, cout] = full_adder(be, a[i], b[i], carry);
        out.push_back(std::move(sum));
        carry = std::move(cout);
    }
    return BitVector(std::move(out));
}

using Columns = std::vector<std::vector<EncBit>>;

// One level of reduction: full adders on each group of three bits, a half
// adder on a leftover pair. `next` is cleared and refilled.
void compress(BitBackend& be, const Columns& cols, Columns& next, std::size_t& adders) {
    for (auto& col : next) col.clear();
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& col = cols[c];
        const bool has_next = c + 1 < cols.size();
        std::size_t i = 0;
        for (; i + 3 <= col.size(); i += 3) {
            auto [sum, carry] = full_adder(be, col[i], col[i + 1], col[i + 2]);
            next[c].push_back(std::move(sum));
            if (has_next) next[c + 1].push_back(std::move(carry));
            ++adders;
        }
        if (col.size() - i == 2) {
            auto [sum, carry] = half_adder(be, col[i], col[i + 1]);
            next[c].push_back(std::move(sum));
            if (has_next) next[c + 1].push_back(std::move(carry));
            i += 2;
        }
        for (; i < col.size(); ++i) next[c].push_back(col[i]);
    }
}

std::size_t tallest(const Columns& cols) {
    std::size_t h = 0;
    for (const auto& col : cols) h = std::max(h, col.size());
    return h;
}

}  // namespace

EncBit not_gate(BitBackend& be, const EncBit& a) { return be.nand(be.constant(true), a); }

EncBit and_gate(BitBackend& be, const EncBit& a, const EncBit& b) { return not_gate(be, be.nand(a, b)); }

EncBit or_gate(BitBackend& be, const EncBit& a, const EncBit& b) {
    return be.nand(not_gate(be, a), not_gate(be, b));
}

EncBit xor_gate(BitBackend& be, const EncBit& a, const EncBit& b) {
    const EncBit n = be.nand(a, b);
    return be.nand(be.nand(a, n), be.nand(b, n));
}

AdderBits half_adder(BitBackend& be, const EncBit& a, const EncBit& b) {
    const EncBit n = be.nand(a, b);
    EncBit sum = be.nand(be.nand(a, n), be.nand(b, n));
    return {std::move(sum), not_gate(be, n)};
}

AdderBits full_adder(BitBackend& be, const EncBit& a, const EncBit& b, const EncBit& cin) {
    const EncBit n1 = be.nand(a, b);
    const EncBit x = be.nand(be.nand(a, n1), be.nand(b, n1));
    const EncBit n2 = be.nand(x, cin);
    EncBit sum = be.nand(be.nand(x, n2), be.nand(cin, n2));
    EncBit carry = be.nand(n1, n2);
    return {std::move(sum), std::move(carry)};
}

BitVector add(BitBackend& be, const BitVector& a, const BitVector& b) {
    require_same_width(a, b, "add");
    return ripple(be, a, b, be.constant(false));
}

BitVector sub(BitBackend& be, const BitVector& a, const BitVector& b) {
    require_same_width(a, b, "sub");
    std::vector<EncBit> inverted;
    inverted.reserve(b.width());
    for (const auto& bit : b.bits) inverted.push_back(not_gate(be, bit));
    return ripple(be, a, BitVector(std::move(inverted)), be.constant(true));
}

BitVector mul_wallace(BitBackend& be, const BitVector& a, const BitVector& b, WallaceReport* report) {
    require_same_width(a, b, "mul_wallace");
    const std::size_t w = a.width();
    const std::size_t out_width = 2 * w;

    // Baugh-Wooley partial products: the sign-weighted cross terms enter as
    // NANDs and the resulting offset is the constant 2^w + 2^(2w-1).
    Columns cols(out_width);
    Columns spare(out_width);
    for (std::size_t c = 0; c < out_width; ++c) {
        cols[c].reserve(w + 2);
        spare[c].reserve(w + 2);
    }
    std::size_t products = 0;
    for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const bool a_sign = i == w - 1;
            const bool b_sign = j == w - 1;
            EncBit pp = (a_sign != b_sign) ? be.nand(a[i], b[j]) : and_gate(be, a[i], b[j]);
            cols[i + j].push_back(std::move(pp));
            ++products;
        }
    }
    if (w < out_width) cols[w].push_back(be.constant(true));
    cols[out_width - 1].push_back(be.constant(true));

    std::size_t adders = 0;
    unsigned levels = 0;
    while (tallest(cols) > 2) {
        compress(be, cols, spare, adders);
        std::swap(cols, spare);
        ++levels;
    }

    std::vector<EncBit> row0;
    std::vector<EncBit> row1;
    row0.reserve(out_width);
    row1.reserve(out_width);
    for (auto& col : cols) {
        row0.push_back(col.size() > 0 ? col[0] : be.constant(false));
        row1.push_back(col.size() > 1 ? col[1] : be.constant(false));
    }
    if (report != nullptr) *report = WallaceReport{levels, adders, products};
    return add(be, BitVector(std::move(row0)), BitVector(std::move(row1)));
}

BitVector mul_schoolbook(BitBackend& be, const BitVector& a, const BitVector& b) {
    require_same_width(a, b, "mul_schoolbook");
    const std::size_t w = a.width();
    const std::size_t out_width = 2 * w;
    BitVector acc = constant_vector(be, 0, out_width);
    for (std::size_t i = 0; i < w; ++i) {
        std::vector<EncBit> row;
        row.reserve(out_width);
        for (std::size_t k = 0; k < i; ++k) row.push_back(be.constant(false));
        for (std::size_t k = i; k < out_width; ++k) {
            const std::size_t src = std::min(k - i, w - 1);  // sign extension of a
            row.push_back(and_gate(be, a[src], b[i]));
        }
        // The top bit of b carries weight -2^(w-1).
        acc = (i + 1 == w) ? sub(be, acc, BitVector(std::move(row))) : add(be, acc, BitVector(std::move(row)));
    }
    return acc;
}

CompareResult compare(BitBackend& be, const BitVector& a, const BitVector& b) {
    require_same_width(a, b, "compare");
    const BitVector diff = sub(be, a, b);
    EncBit any = diff[0];
    for (std::size_t i = 1; i < diff.width(); ++i) any = or_gate(be, any, diff[i]);
    return {diff.sign(), not_gate(be, any)};
}

EncBit less_than(BitBackend& be, const BitVector& a, const BitVector& b) {
    require_same_width(a, b, "less_than");
    return sub(be, a, b).sign();
}

BitVector mux(BitBackend& be, const EncBit& sel, const BitVector& on_true, const BitVector& on_false) {
    require_same_width(on_true, on_false, "mux");
    const EncBit not_sel = not_gate(be, sel);
    std::vector<EncBit> out;
    out.reserve(on_true.width());
    for (std::size_t i = 0; i < on_true.width(); ++i)
        out.push_back(be.nand(be.nand(sel, on_true[i]), be.nand(not_sel, on_false[i])));
    return BitVector(std::move(out));
}

unsigned wallace_levels(std::size_t width) {
    if (width == 0) return 0;
    const std::size_t out_width = 2 * width;
    std::vector<std::size_t> heights(out_width, 0);
    for (std::size_t i = 0; i < width; ++i)
        for (std::size_t j = 0; j < width; ++j) ++heights[i + j];
    if (width < out_width) ++heights[width];
    ++heights[out_width - 1];
    unsigned levels = 0;
    while (*std::max_element(heights.begin(), heights.end()) > 2) {
        std::vector<std::size_t> next(out_width, 0);
        for (std::size_t c = 0; c < out_width; ++c) {
            const std::size_t groups = heights[c] / 3;
            const std::size_t halves = heights[c] % 3 == 2 ? 1 : 0;
            next[c] += heights[c] - 2 * groups - halves;
            if (c + 1 < out_width) next[c + 1] += groups + halves;
        }
        heights = std::move(next);
        ++levels;
    }
    return levels;
}

BitVector constant_vector(BitBackend& be, std::int64_t value, std::size_t width) {
    std::vector<EncBit> bits;
    bits.reserve(width);
    const auto u = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < width; ++i) bits.push_back(be.constant(i < 64 ? ((u >> i) & 1u) : (value < 0)));
    return BitVector(std::move(bits));
}

BitVector encrypt_vector(BitBackend& be, std::int64_t value, std::size_t width, std::uint64_t seed) {
    std::vector<EncBit> bits;
    bits.reserve(width);
    const auto u = static_cast<std::uint64_t>(value);
    for (std::size_t i = 0; i < width; ++i) {
        const bool bit = i < 64 ? ((u >> i) & 1u) : (value < 0);
        bits.push_back(be.encrypt(bit, mix64(seed ^ mix64(i + 1))));
    }
    return BitVector(std::move(bits));
}

std::int64_t decrypt_vector(BitBackend& be, const BitVector& v) {
    if (v.width() == 0 || v.width() > 64) fail(ErrorKind::Usage, "decrypt_vector supports widths 1..64");
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < v.width(); ++i)
        if (be.decrypt(v[i])) u |= std::uint64_t{1} << i;
    if (v.width() < 64 && ((u >> (v.width() - 1)) & 1u)) u |= ~std::uint64_t{0} << v.width();
    return static_cast<std::int64_t>(u);
}

}  // namespace gcnn
