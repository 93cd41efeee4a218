// SPDX-License-Identifier: Apache-2.0

#include "gcnn/fhe_core.hpp"

#include <cmath>
#include <algorithm>

#include "gcnn/error.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

std::uint64_t hash_words(std::span<const std::uint16_t> words, std::uint64_t salt) noexcept {
    std::uint64_t h = mix64(salt ^ words.size());
    std::size_t i = 0;
    for (; i + 4 <= words.size(); i += 4) {
        const std::uint64_t packed = std::uint64_t{words[i]} | (std::uint64_t{words[i + 1]} << 16) |
                                     (std::uint64_t{words[i + 2]} << 32) |
                                     (std::uint64_t{words[i + 3]} << 48);
        h = (h ^ packed) * 0x100000001b3ULL;
        h ^= h >> 29;
    }
    for (; i < words.size(); ++i) h = (h ^ words[i]) * 0x100000001b3ULL;
    return mix64(h);
}

int Rng::centered_binomial(unsigned eta) noexcept {
    int total = 0;
    while (eta > 0) {
        const unsigned take = eta > 32 ? 32 : eta;
        const std::uint64_t word = bits(2 * take);
        const std::uint64_t lo_mask = (std::uint64_t{1} << take) - 1;
        total += __builtin_popcountll(word & lo_mask) - __builtin_popcountll((word >> take) & lo_mask);
        eta -= take;
    }
    return total;
}

FheParams FheParams::make(std::size_t lattice_dim, unsigned log_q, double noise_stddev, Preset preset) {
    FheParams p;
    p.lattice_dim = lattice_dim;
    p.log_q = log_q;
    p.modulus = log_q < 64 ? (std::uint64_t{1} << log_q) : 0;
    p.ct_dim = (lattice_dim + 1) * log_q;
    p.noise_stddev = noise_stddev;
    p.noise_budget = static_cast<double>(p.modulus) / 4.0;
    p.preset = preset;
    p.validate();
    return p;
}

// sigma = 1 gives eta = 2, so a fresh error is bounded by 2 and one NAND of
// fresh inputs stays below budget / 2 at both presets.
FheParams FheParams::toy() { return make(8, 12, 1.0, Preset::Toy); }
FheParams FheParams::demo() { return make(32, 16, 1.0, Preset::Demo); }

FheParams FheParams::from_preset(Preset preset) {
    switch (preset) {
        case Preset::Toy: return toy();
        case Preset::Demo: return demo();
        default: fail(ErrorKind::Parameter, "unknown parameter preset id");
    }
}

FheParams FheParams::from_name(std::string_view name) {
    if (name == "toy") return toy();
    if (name == "demo") return demo();
    fail(ErrorKind::Parameter, "unknown preset '" + std::string(name) + "' (expected toy or demo)");
}

std::string_view preset_name(Preset preset) noexcept {
    switch (preset) {
        case Preset::Toy: return "toy";
        case Preset::Demo: return "demo";
        default: return "custom";
    }
}

void FheParams::validate() const {
    if (lattice_dim == 0) fail(ErrorKind::Parameter, "lattice_dim must be positive");
    if (log_q < 4 || log_q > 16) fail(ErrorKind::Parameter, "log_q must lie in [4, 16]");
    if (modulus != (std::uint64_t{1} << log_q))
        fail(ErrorKind::Parameter, "modulus must equal 2^log_q (power of two)");
    if (ct_dim != (lattice_dim + 1) * log_q) fail(ErrorKind::Parameter, "ct_dim must equal (lattice_dim + 1) * log_q");
    if (!(noise_stddev > 0.0)) fail(ErrorKind::Parameter, "noise_stddev must be positive");
    if (!(noise_stddev * 2.0 < noise_budget)) fail(ErrorKind::Parameter, "noise_stddev * 2 must be below noise_budget");
    if (noise_budget != static_cast<double>(modulus) / 4.0) fail(ErrorKind::Parameter, "noise_budget must equal q / 4");
}

unsigned FheParams::noise_eta() const {
    const long eta = std::lround(2.0 * noise_stddev * noise_stddev);
    return eta < 1 ? 1u : static_cast<unsigned>(eta);
}

unsigned FheParams::rated_depth(double limit) const {
    unsigned depth = 0;
    double noise = fresh_noise_bound();
    while (true) {
        const double next = nand_noise(noise, noise);
        if (!(next < limit)) return depth;
        noise = next;
        ++depth;
    }
}

std::vector<std::uint16_t> SecretKey::expanded() const {
    const unsigned l = params.log_q;
    std::vector<std::uint16_t> v(params.ct_dim);
    for (std::size_t i = 0; i < secret_vector.size(); ++i)
        for (unsigned j = 0; j < l; ++j)
            v[i * l + j] = static_cast<std::uint16_t>((std::uint32_t{secret_vector[i]} << j) & params.mask());
    return v;
}

Ciphertext::Ciphertext(std::size_t dim, std::vector<std::uint16_t> matrix, double noise_estimate)
    : dim_(dim), matrix_(std::move(matrix)), noise_estimate_(noise_estimate) {
    if (matrix_.size() != dim_ * dim_) fail(ErrorKind::Format, "ciphertext matrix size does not match its dimension");
    if (noise_estimate_ < 0.0) fail(ErrorKind::Format, "negative noise estimate");
}

Ciphertext Ciphertext::trivial(std::size_t dim, bool bit) {
    std::vector<std::uint16_t> m(dim * dim, 0);
    if (bit)
        for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = 1;
    Ciphertext ct(dim, std::move(m), 0.0);
    ct.trivial_ = true;
    ct.trivial_bit_ = bit;
    return ct;
}

SecretKey keygen(const FheParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    SecretKey sk{params, {}};
    sk.secret_vector.resize(params.lattice_dim + 1);
    for (std::size_t i = 0; i < params.lattice_dim; ++i)
        sk.secret_vector[i] = static_cast<std::uint16_t>(rng.bits(params.log_q));
    sk.secret_vector.back() = 1;
    return sk;
}

Ciphertext encrypt_bit(const SecretKey& sk, bool bit, std::uint64_t seed) {
    const FheParams& p = sk.params;
    const std::size_t n = p.lattice_dim;
    const std::size_t dim = p.ct_dim;
    const unsigned l = p.log_q;
    const unsigned eta = p.noise_eta();
    Rng rng(seed);

    std::vector<std::uint16_t> m(dim * dim, 0);
    std::vector<std::uint32_t> row(n + 1);
    for (std::size_t k = 0; k < dim; ++k) {
        // LWE sample (a, -<a, t'> + e) so that <row, t> = e.
        std::uint32_t dot = 0;
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = static_cast<std::uint32_t>(rng.bits(l));
            dot += row[i] * sk.secret_vector[i];
        }
        const int e = rng.centered_binomial(eta);
        row[n] = static_cast<std::uint32_t>(-static_cast<std::int64_t>(dot) + e) & p.mask();
        std::uint16_t* out = &m[k * dim];
        for (std::size_t i = 0; i <= n; ++i)
            for (unsigned j = 0; j < l; ++j) out[i * l + j] = static_cast<std::uint16_t>((row[i] >> j) & 1u);
        if (bit) out[k] = static_cast<std::uint16_t>((out[k] + 1) & p.mask());
    }
    return Ciphertext(dim, std::move(m), p.fresh_noise_bound());
}

namespace {

// Row k of C times v, mod q.
std::uint16_t row_dot(const Ciphertext& ct, std::size_t k, const std::vector<std::uint16_t>& v, std::uint16_t mask) {
    std::uint32_t acc = 0;
    const std::size_t dim = ct.dim();
    for (std::size_t c = 0; c < dim; ++c) acc += std::uint32_t{ct.at(k, c)} * v[c];
    return static_cast<std::uint16_t>(acc & mask);
}

std::int64_t centered(std::uint64_t x, std::uint64_t q) {
    const auto s = static_cast<std::int64_t>(x);
    return s >= static_cast<std::int64_t>(q / 2) ? s - static_cast<std::int64_t>(q) : s;
}

void check_dims(const FheParams& params, const Ciphertext& ct) {
    if (ct.dim() != params.ct_dim) fail(ErrorKind::Usage, "ciphertext dimension does not match parameters");
}

}  // namespace

bool decrypt_bit(const SecretKey& sk, const Ciphertext& ct) {
    const FheParams& p = sk.params;
    check_dims(p, ct);
    if (ct.is_trivial()) return ct.trivial_bit();
    if (ct.noise_estimate() >= p.noise_budget)
        fail(ErrorKind::NoiseExhausted, "ciphertext noise estimate exceeds the decryption budget; refresh was required");
    const auto v = sk.expanded();
    const std::size_t k = p.lattice_dim * p.log_q + (p.log_q - 1);  // v[k] = q / 2
    const std::uint64_t x = row_dot(ct, k, v, p.mask());
    return ((x + p.modulus / 4) & p.mask()) >= p.modulus / 2;
}

std::int64_t measure_noise(const SecretKey& sk, const Ciphertext& ct, bool plaintext) {
    const FheParams& p = sk.params;
    check_dims(p, ct);
    const auto v = sk.expanded();
    std::int64_t worst = 0;
    for (std::size_t k = 0; k < p.ct_dim; ++k) {
        const std::uint64_t x = row_dot(ct, k, v, p.mask());
        const std::uint64_t expect = plaintext ? v[k] : 0;
        const std::int64_t e = centered((x - expect) & p.mask(), p.modulus);
        worst = std::max(worst, e < 0 ? -e : e);
    }
    return worst;
}

Ciphertext nand(const FheParams& params, const Ciphertext& a, const Ciphertext& b) {
    check_dims(params, a);
    check_dims(params, b);
    const std::size_t dim = params.ct_dim;
    const std::uint16_t mask = params.mask();

    if (a.is_trivial() && b.is_trivial()) return Ciphertext::trivial(dim, !(a.trivial_bit() && b.trivial_bit()));
    if ((a.is_trivial() && !a.trivial_bit()) || (b.is_trivial() && !b.trivial_bit()))
        return Ciphertext::trivial(dim, true);

    // One operand is the trivial 1: the product reduces to the other operand
    // exactly (Flatten preserves C*v), so the result is I - C.
    if (a.is_trivial() || b.is_trivial()) {
        const Ciphertext& other = a.is_trivial() ? b : a;
        std::vector<std::uint16_t> m(dim * dim);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<std::uint16_t>(-other.matrix()[i] & mask);
        for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = static_cast<std::uint16_t>((m[i * dim + i] + 1) & mask);
        return Ciphertext(dim, std::move(m), other.noise_estimate());
    }

    const double estimate = params.nand_noise(a.noise_estimate(), b.noise_estimate());
    if (estimate >= params.noise_budget)
        fail(ErrorKind::NoiseExhausted, "NAND result would exceed the noise budget; refresh the operands first");

    const std::size_t comps = params.lattice_dim + 1;
    const unsigned l = params.log_q;
    std::vector<std::uint16_t> out(dim * dim);
    std::vector<std::uint16_t> acc(dim);
    const std::uint16_t* am = a.matrix().data();
    for (std::size_t r = 0; r < dim; ++r) {
        std::fill(acc.begin(), acc.end(), std::uint16_t{0});
        const std::uint16_t* brow = &b.matrix()[r * dim];
        for (std::size_t i = 0; i < comps; ++i) {
            // Gadget recomposition then re-decomposition of component i.
            std::uint32_t comp = 0;
            for (unsigned j = 0; j < l; ++j) comp += std::uint32_t{brow[i * l + j]} << j;
            comp &= mask;
            while (comp != 0) {
                const unsigned j = static_cast<unsigned>(__builtin_ctz(comp));
                comp &= comp - 1;
                const std::uint16_t* arow = am + (i * l + j) * dim;
                for (std::size_t c = 0; c < dim; ++c) acc[c] = static_cast<std::uint16_t>(acc[c] + arow[c]);
            }
        }
        std::uint16_t* orow = &out[r * dim];
        for (std::size_t c = 0; c < dim; ++c) orow[c] = static_cast<std::uint16_t>(-acc[c] & mask);
        orow[r] = static_cast<std::uint16_t>((orow[r] + 1) & mask);
    }
    return Ciphertext(dim, std::move(out), estimate);
}

Ciphertext refresh(const SecretKey& sk_oracle, const Ciphertext& ct, std::uint64_t seed) {
    const bool bit = decrypt_bit(sk_oracle, ct);
    if (ct.is_trivial()) return ct;
    return encrypt_bit(sk_oracle, bit, seed);
}

}  // namespace gcnn
