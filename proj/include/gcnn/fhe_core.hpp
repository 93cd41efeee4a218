// SPDX-License-Identifier: Apache-2.0
//
// GSW-style bit encryption with NAND as the only homomorphic operation.
//
// Ciphertexts are N x N matrices over Z_q (N = (n+1) * log2 q) satisfying
// C * v = mu * v + e, where v = powers-of-two(t) and t = (-s, 1) is the
// secret vector. NAND is I - Flatten(C_b) * C_a; flattening (gadget
// decomposition) makes the left factor binary so noise grows additively:
// |e_out| <= N * |e_a| + |e_b|.
//
// The presets are sized for desk-scale experiments and offer no real-world
// security.

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace gcnn {

enum class Preset : std::uint8_t { Toy = 0, Demo = 1, Custom = 0xFE };

struct FheParams {
    std::size_t lattice_dim = 0;  // n
    std::uint64_t modulus = 0;    // q = 2^log_q
    unsigned log_q = 0;
    std::size_t ct_dim = 0;  // (n + 1) * log_q
    double noise_stddev = 0.0;
    double noise_budget = 0.0;  // q / 4: decryption is exact while |e| < budget
    Preset preset = Preset::Custom;

    /// Derives modulus, ct_dim and budget from the free parameters.
    static FheParams make(std::size_t lattice_dim, unsigned log_q, double noise_stddev,
                          Preset preset = Preset::Custom);
    static FheParams toy();
    static FheParams demo();
    static FheParams from_preset(Preset preset);
    static FheParams from_name(std::string_view name);

    /// Throws ErrorKind::Parameter when the derived fields are inconsistent.
    void validate() const;

    /// Width of the centered-binomial error sampler; also the exact bound on
    /// a fresh sample's magnitude.
    [[nodiscard]] unsigned noise_eta() const;
    [[nodiscard]] double fresh_noise_bound() const { return static_cast<double>(noise_eta()); }
    [[nodiscard]] std::uint16_t mask() const { return static_cast<std::uint16_t>(modulus - 1); }

    /// Worst-case estimate of nand(a, b) for non-trivial operands.
    [[nodiscard]] double nand_noise(double noise_a, double noise_b) const {
        return noise_a * static_cast<double>(ct_dim) + noise_b;
    }

    /// Largest depth of a balanced NAND tree over fresh encryptions whose
    /// estimated noise stays below `limit`.
    [[nodiscard]] unsigned rated_depth(double limit) const;

    bool operator==(const FheParams&) const = default;
};

std::string_view preset_name(Preset preset) noexcept;

struct SecretKey {
    FheParams params;
    std::vector<std::uint16_t> secret_vector;  // (-s, 1) mod q, length n + 1

    /// Powers-of-two expansion of the secret vector, length ct_dim.
    [[nodiscard]] std::vector<std::uint16_t> expanded() const;
    bool operator==(const SecretKey&) const = default;
};

class Ciphertext {
public:
    Ciphertext() = default;
    Ciphertext(std::size_t dim, std::vector<std::uint16_t> matrix, double noise_estimate);

    /// Noiseless public encoding bit * I.
    static Ciphertext trivial(std::size_t dim, bool bit);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] const std::vector<std::uint16_t>& matrix() const noexcept { return matrix_; }
    [[nodiscard]] std::uint16_t at(std::size_t row, std::size_t col) const { return matrix_[row * dim_ + col]; }
    [[nodiscard]] double noise_estimate() const noexcept { return noise_estimate_; }

    /// Set only for trivial encodings; the plaintext is public.
    [[nodiscard]] bool is_trivial() const noexcept { return trivial_; }
    [[nodiscard]] bool trivial_bit() const noexcept { return trivial_bit_; }

    bool operator==(const Ciphertext&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<std::uint16_t> matrix_;
    double noise_estimate_ = 0.0;
    bool trivial_ = false;
    bool trivial_bit_ = false;
};

SecretKey keygen(const FheParams& params, std::uint64_t seed);

Ciphertext encrypt_bit(const SecretKey& sk, bool bit, std::uint64_t seed);

/// Throws ErrorKind::NoiseExhausted once the tracked estimate reaches the budget.
bool decrypt_bit(const SecretKey& sk, const Ciphertext& ct);

/// Infinity norm of the actual error vector C*v - mu*v. Needs the key; used
/// by the noise harnesses to check that the tracked estimate is an upper bound.
std::int64_t measure_noise(const SecretKey& sk, const Ciphertext& ct, bool plaintext);

/// Homomorphic NAND. Operands that are trivial encodings take an exact
/// scaling path; otherwise the estimate follows FheParams::nand_noise.
/// Throws ErrorKind::NoiseExhausted if the result's estimate reaches the budget.
Ciphertext nand(const FheParams& params, const Ciphertext& a, const Ciphertext& b);

/// Trusted decrypt-and-re-encrypt; resets the estimate to the fresh level.
Ciphertext refresh(const SecretKey& sk_oracle, const Ciphertext& ct, std::uint64_t seed);

}  // namespace gcnn
