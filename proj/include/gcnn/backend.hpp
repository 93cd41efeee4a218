// SPDX-License-Identifier: Apache-2.0
//
// Uniform bit abstraction over the clear (plaintext oracle) backend and the
// GSW backend. Circuits only ever see EncBit and the two primitives exposed
// by BitBackend: nand() and constant().

#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>

#include "gcnn/fhe_core.hpp"

namespace gcnn {

enum class BackendKind : std::uint8_t { Clear = 0, Gsw = 1 };

std::string_view to_string(BackendKind kind) noexcept;

class EncBit {
public:
    EncBit() = default;

    static EncBit clear(bool value, std::uint32_t wire = 0) {
        EncBit b;
        b.value_ = value;
        b.wire_ = wire;
        return b;
    }
    static EncBit gsw(std::shared_ptr<const Ciphertext> ct) {
        EncBit b;
        b.kind_ = BackendKind::Gsw;
        b.ct_ = std::move(ct);
        return b;
    }

    [[nodiscard]] BackendKind kind() const noexcept { return kind_; }
    [[nodiscard]] bool has_clear_value() const noexcept { return kind_ == BackendKind::Clear; }
    [[nodiscard]] bool clear_value() const noexcept { return value_; }
    [[nodiscard]] const std::shared_ptr<const Ciphertext>& ciphertext() const noexcept { return ct_; }
    /// Trace identifier assigned by a tracing clear backend; 0 otherwise.
    [[nodiscard]] std::uint32_t wire() const noexcept { return wire_; }

private:
    std::shared_ptr<const Ciphertext> ct_;
    std::uint32_t wire_ = 0;
    bool value_ = false;
    BackendKind kind_ = BackendKind::Clear;
};

/// Gate counters. Safe for concurrent updates; counters only grow until reset().
class GateStats {
public:
    void add_nand() noexcept { shard().nand.fetch_add(1, std::memory_order_relaxed); }
    void add_constant() noexcept { shard().constants.fetch_add(1, std::memory_order_relaxed); }
    void add_refresh() noexcept { shard().refresh.fetch_add(1, std::memory_order_relaxed); }
    void observe_noise(double noise) noexcept;

    [[nodiscard]] std::uint64_t nand_count() const noexcept;
    [[nodiscard]] std::uint64_t constant_count() const noexcept;
    [[nodiscard]] std::uint64_t refresh_count() const noexcept;
    [[nodiscard]] double max_noise_seen() const noexcept { return max_noise_.load(std::memory_order_relaxed); }

    void reset() noexcept;

private:
    struct alignas(64) Shard {
        std::atomic<std::uint64_t> nand{0};
        std::atomic<std::uint64_t> constants{0};
        std::atomic<std::uint64_t> refresh{0};
    };
    static constexpr std::size_t kShards = 16;

    Shard& shard() noexcept;

    std::array<Shard, kShards> shards_{};
    std::atomic<double> max_noise_{0.0};
};

class BitBackend {
public:
    virtual ~BitBackend() = default;

    [[nodiscard]] virtual BackendKind kind() const noexcept = 0;

    virtual EncBit nand(const EncBit& a, const EncBit& b) = 0;
    /// Public, noiseless constant.
    virtual EncBit constant(bool bit) = 0;
    /// Private input bit (encrypted on GSW); `seed` drives any randomness.
    virtual EncBit encrypt(bool bit, std::uint64_t seed) = 0;
    /// Oracle access to the plaintext of a bit.
    virtual bool decrypt(const EncBit& bit) = 0;

    GateStats& stats() noexcept { return stats_; }
    [[nodiscard]] const GateStats& stats() const noexcept { return stats_; }

    /// Clear backend only: records that a fixed-point result overflowed its
    /// format. Other backends cannot observe values and ignore this.
    void note_overflow(const char* where) noexcept;
    [[nodiscard]] std::uint64_t overflow_count() const noexcept { return overflows_.load(); }
    [[nodiscard]] std::string first_overflow() const;

protected:
    void check_kind(const EncBit& bit) const;

private:
    GateStats stats_;
    std::atomic<std::uint64_t> overflows_{0};
    mutable std::mutex overflow_mutex_;
    std::string first_overflow_;
};

/// Plaintext backend: evaluates the identical circuits on raw bits.
class ClearBackend final : public BitBackend {
public:
    [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Clear; }

    EncBit nand(const EncBit& a, const EncBit& b) override;
    EncBit constant(bool bit) override;
    EncBit encrypt(bool bit, std::uint64_t seed) override;
    bool decrypt(const EncBit& bit) override;

    /// Starts recording a structural digest of every primitive invocation
    /// (operand wires, constants). Requires single-threaded evaluation.
    void start_trace();
    void stop_trace() noexcept { tracing_ = false; }
    [[nodiscard]] std::uint64_t trace_digest() const noexcept { return trace_hash_; }
    [[nodiscard]] std::uint64_t trace_length() const noexcept { return trace_events_; }

private:
    std::uint32_t trace(std::uint64_t event) noexcept;

    bool tracing_ = false;
    std::uint32_t next_wire_ = 0;
    std::uint64_t trace_hash_ = 0;
    std::uint64_t trace_events_ = 0;
};

enum class RefreshPolicy { Automatic, Manual };

/// GSW backend. Holds the secret key as the trusted refresh/decryption oracle.
class GswBackend final : public BitBackend {
public:
    GswBackend(std::shared_ptr<const SecretKey> key, std::uint64_t seed,
               RefreshPolicy policy = RefreshPolicy::Automatic);

    [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Gsw; }

    /// Automatic policy: if the estimate of the result would exceed
    /// noise_budget / 2, operands are refreshed first (left operand, then right).
    EncBit nand(const EncBit& a, const EncBit& b) override;
    EncBit constant(bool bit) override;
    EncBit encrypt(bool bit, std::uint64_t seed) override;
    bool decrypt(const EncBit& bit) override;

    /// Refresh with a seed derived from the ciphertext content, so results do
    /// not depend on evaluation order or thread count.
    EncBit refresh(const EncBit& bit);

    [[nodiscard]] const FheParams& params() const noexcept { return key_->params; }
    [[nodiscard]] const SecretKey& key() const noexcept { return *key_; }
    [[nodiscard]] RefreshPolicy policy() const noexcept { return policy_; }

private:
    std::shared_ptr<const SecretKey> key_;
    std::uint64_t seed_;
    RefreshPolicy policy_;
    std::shared_ptr<const Ciphertext> zero_;
    std::shared_ptr<const Ciphertext> one_;
};

}  // namespace gcnn
