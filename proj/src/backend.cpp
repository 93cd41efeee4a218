// SPDX-License-Identifier: Apache-2.0

#include "gcnn/backend.hpp"

#include "gcnn/error.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

std::string_view to_string(BackendKind kind) noexcept { return kind == BackendKind::Clear ? "clear" : "gsw"; }

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Usage: return "usage error";
        case ErrorKind::Parameter: return "parameter error";
        case ErrorKind::Range: return "range error";
        case ErrorKind::Shape: return "shape error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::NoiseExhausted: return "noise exhausted";
    }
    return "error";
}

namespace {
std::atomic<std::size_t> g_next_shard{0};
}

GateStats::Shard& GateStats::shard() noexcept {
    thread_local const std::size_t index = g_next_shard.fetch_add(1, std::memory_order_relaxed) % kShards;
    return shards_[index];
}

void GateStats::observe_noise(double noise) noexcept {
    double seen = max_noise_.load(std::memory_order_relaxed);
    while (noise > seen && !max_noise_.compare_exchange_weak(seen, noise, std::memory_order_relaxed)) {
    }
}

std::uint64_t GateStats::nand_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto& s : shards_) total += s.nand.load(std::memory_order_relaxed);
    return total;
}

std::uint64_t GateStats::constant_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto& s : shards_) total += s.constants.load(std::memory_order_relaxed);
    return total;
}

std::uint64_t GateStats::refresh_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto& s : shards_) total += s.refresh.load(std::memory_order_relaxed);
    return total;
}

void GateStats::reset() noexcept {
    for (auto& s : shards_) {
        s.nand.store(0);
        s.constants.store(0);
        s.refresh.store(0);
    }
    max_noise_.store(0.0);
}

void BitBackend::note_overflow(const char* where) noexcept {
    if (overflows_.fetch_add(1) == 0) {
        std::lock_guard lock(overflow_mutex_);
        first_overflow_ = where;
    }
}

std::string BitBackend::first_overflow() const {
    std::lock_guard lock(overflow_mutex_);
    return first_overflow_;
}

void BitBackend::check_kind(const EncBit& bit) const {
    if (bit.kind() != kind())
        fail(ErrorKind::Usage, "bit from the " + std::string(to_string(bit.kind())) + " backend used with the " +
                                   std::string(to_string(kind())) + " backend");
}

// ---------------------------------------------------------------------------

void ClearBackend::start_trace() {
    tracing_ = true;
    next_wire_ = 0;
    trace_hash_ = 0xcbf29ce484222325ULL;
    trace_events_ = 0;
}

std::uint32_t ClearBackend::trace(std::uint64_t event) noexcept {
    trace_hash_ = mix64(trace_hash_ ^ event);
    ++trace_events_;
    return ++next_wire_;
}

EncBit ClearBackend::nand(const EncBit& a, const EncBit& b) {
    if (a.kind() != BackendKind::Clear) check_kind(a);
    if (b.kind() != BackendKind::Clear) check_kind(b);
    stats().add_nand();
    const bool out = !(a.clear_value() && b.clear_value());
    if (!tracing_) return EncBit::clear(out);
    const std::uint32_t wire = trace((std::uint64_t{1} << 62) | (std::uint64_t{a.wire()} << 31) | b.wire());
    return EncBit::clear(out, wire);
}

EncBit ClearBackend::constant(bool bit) {
    stats().add_constant();
    if (!tracing_) return EncBit::clear(bit);
    return EncBit::clear(bit, trace((std::uint64_t{2} << 62) | (bit ? 1u : 0u)));
}

EncBit ClearBackend::encrypt(bool bit, std::uint64_t /*seed*/) {
    if (!tracing_) return EncBit::clear(bit);
    // Input values must not reach the digest.
    return EncBit::clear(bit, trace(std::uint64_t{3} << 62));
}

bool ClearBackend::decrypt(const EncBit& bit) {
    check_kind(bit);
    return bit.clear_value();
}

// ---------------------------------------------------------------------------

GswBackend::GswBackend(std::shared_ptr<const SecretKey> key, std::uint64_t seed, RefreshPolicy policy)
    : key_(std::move(key)), seed_(seed), policy_(policy) {
    if (!key_) fail(ErrorKind::Usage, "the GSW backend requires a secret key");
    key_->params.validate();
    zero_ = std::make_shared<const Ciphertext>(Ciphertext::trivial(key_->params.ct_dim, false));
    one_ = std::make_shared<const Ciphertext>(Ciphertext::trivial(key_->params.ct_dim, true));
}

EncBit GswBackend::constant(bool bit) {
    stats().add_constant();
    return EncBit::gsw(bit ? one_ : zero_);
}

EncBit GswBackend::encrypt(bool bit, std::uint64_t seed) {
    auto ct = std::make_shared<const Ciphertext>(encrypt_bit(*key_, bit, mix64(seed ^ seed_)));
    stats().observe_noise(ct->noise_estimate());
    return EncBit::gsw(std::move(ct));
}

bool GswBackend::decrypt(const EncBit& bit) {
    check_kind(bit);
    return decrypt_bit(*key_, *bit.ciphertext());
}

EncBit GswBackend::refresh(const EncBit& bit) {
    check_kind(bit);
    const Ciphertext& ct = *bit.ciphertext();
    if (ct.is_trivial()) return bit;
    const std::uint64_t seed = hash_words(ct.matrix(), seed_);
    stats().add_refresh();
    return EncBit::gsw(std::make_shared<const Ciphertext>(gcnn::refresh(*key_, ct, seed)));
}

EncBit GswBackend::nand(const EncBit& a, const EncBit& b) {
    check_kind(a);
    check_kind(b);
    stats().add_nand();
    const FheParams& p = key_->params;
    const Ciphertext& ca = *a.ciphertext();
    const Ciphertext& cb = *b.ciphertext();
    if ((ca.is_trivial() && !ca.trivial_bit()) || (cb.is_trivial() && !cb.trivial_bit())) return EncBit::gsw(one_);
    if (ca.is_trivial() && cb.is_trivial()) return EncBit::gsw(zero_);  // both are the constant 1

    EncBit left = a;
    EncBit right = b;
    if (policy_ == RefreshPolicy::Automatic) {
        const auto predicted = [&] {
            const Ciphertext& x = *left.ciphertext();
            const Ciphertext& y = *right.ciphertext();
            if (x.is_trivial() || y.is_trivial()) return std::max(x.noise_estimate(), y.noise_estimate());
            return p.nand_noise(x.noise_estimate(), y.noise_estimate());
        };
        const double limit = p.noise_budget / 2.0;
        if (predicted() > limit) left = refresh(left);
        if (predicted() > limit) right = refresh(right);
    }
    auto out = std::make_shared<const Ciphertext>(gcnn::nand(p, *left.ciphertext(), *right.ciphertext()));
    stats().observe_noise(out->noise_estimate());
    return EncBit::gsw(std::move(out));
}

}  // namespace gcnn
