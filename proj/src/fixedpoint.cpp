// SPDX-License-Identifier: Apache-2.0

#include "gcnn/fixedpoint.hpp"

#include <cmath>
#include <string>

#include "gcnn/error.hpp"

namespace gcnn {

void FixedPointFormat::validate() const {
    if (total_bits < 2 || total_bits > 62) fail(ErrorKind::Parameter, "fixed-point total_bits must lie in [2, 62]");
    if (frac_bits >= total_bits) fail(ErrorKind::Parameter, "fixed-point frac_bits must be below total_bits");
}

std::int64_t FixedPointFormat::quantize(double r) const {
    const double scaled = std::floor(std::ldexp(r, static_cast<int>(frac_bits)));
    if (!(scaled >= static_cast<double>(min_raw()) && scaled <= static_cast<double>(max_raw())))
        fail(ErrorKind::Range, "value " + std::to_string(r) + " is outside the fixed-point range of Q" +
                                   std::to_string(total_bits - frac_bits) + "." + std::to_string(frac_bits));
    return static_cast<std::int64_t>(scaled);
}

double FixedPointFormat::to_real(std::int64_t raw) const noexcept {
    return std::ldexp(static_cast<double>(raw), -static_cast<int>(frac_bits));
}

namespace {

void require_same_format(const FixedPointCipher& a, const FixedPointCipher& b, const char* op) {
    if (!(a.format == b.format)) fail(ErrorKind::Usage, std::string(op) + ": fixed-point formats differ");
}

bool clear_bit(const EncBit& b) { return b.clear_value(); }

}  // namespace

FixedPointCipher encode(BitBackend& be, double r, const FixedPointFormat& fmt, std::uint64_t seed) {
    fmt.validate();
    return {encrypt_vector(be, fmt.quantize(r), fmt.total_bits, seed), fmt};
}

FixedPointCipher encode_public(BitBackend& be, double r, const FixedPointFormat& fmt) {
    fmt.validate();
    return {constant_vector(be, fmt.quantize(r), fmt.total_bits), fmt};
}

FixedPointCipher fp_zero(BitBackend& be, const FixedPointFormat& fmt) {
    return {constant_vector(be, 0, fmt.total_bits), fmt};
}

std::int64_t decode_raw(BitBackend& be, const FixedPointCipher& x) { return decrypt_vector(be, x.bits); }

double decode(BitBackend& be, const FixedPointCipher& x) { return x.format.to_real(decode_raw(be, x)); }

FixedPointCipher fp_add(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b) {
    require_same_format(a, b, "fp_add");
    FixedPointCipher out{add(be, a.bits, b.bits), a.format};
    if (be.kind() == BackendKind::Clear) {
        const bool sa = clear_bit(a.bits.sign());
        if (sa == clear_bit(b.bits.sign()) && sa != clear_bit(out.bits.sign())) be.note_overflow("fp_add");
    }
    return out;
}

FixedPointCipher fp_sub(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b) {
    require_same_format(a, b, "fp_sub");
    FixedPointCipher out{sub(be, a.bits, b.bits), a.format};
    if (be.kind() == BackendKind::Clear) {
        const bool sa = clear_bit(a.bits.sign());
        if (sa != clear_bit(b.bits.sign()) && sa != clear_bit(out.bits.sign())) be.note_overflow("fp_sub");
    }
    return out;
}

FixedPointCipher fp_mul(BitBackend& be, const FixedPointCipher& a, const FixedPointCipher& b) {
    require_same_format(a, b, "fp_mul");
    const unsigned w = a.format.total_bits;
    const unsigned f = a.format.frac_bits;
    const BitVector wide = mul_wallace(be, a.bits, b.bits);
    // Arithmetic shift right by f is a wiring choice: keep bits [f, f + w).
    std::vector<EncBit> bits(wide.bits.begin() + f, wide.bits.begin() + f + w);
    if (be.kind() == BackendKind::Clear) {
        const bool top = clear_bit(wide[f + w - 1]);
        for (std::size_t i = f + w; i < wide.width(); ++i)
            if (clear_bit(wide[i]) != top) {
                be.note_overflow("fp_mul");
                break;
            }
    }
    return {BitVector(std::move(bits)), a.format};
}

FixedPointCipher fp_mul_const(BitBackend& be, const FixedPointCipher& a, double c) {
    return fp_mul(be, a, encode_public(be, c, a.format));
}

EncBit fp_geq_zero(BitBackend& be, const FixedPointCipher& x) { return not_gate(be, x.bits.sign()); }

FixedPointCipher fp_relu(BitBackend& be, const FixedPointCipher& x) {
    const EncBit keep = fp_geq_zero(be, x);
    return {mux(be, keep, x.bits, fp_zero(be, x.format).bits), x.format};
}

FixedPointCipher fp_max(BitBackend& be, std::span<const FixedPointCipher> values) {
    if (values.empty()) fail(ErrorKind::Usage, "fp_max of an empty list");
    FixedPointCipher current = values.front();
    for (std::size_t i = 1; i < values.size(); ++i) {
        require_same_format(current, values[i], "fp_max");
        const EncBit next_is_larger = less_than(be, current.bits, values[i].bits);
        current.bits = mux(be, next_is_larger, values[i].bits, current.bits);
    }
    return current;
}

}  // namespace gcnn
