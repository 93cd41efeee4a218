// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <memory>

#include "gcnn/backend.hpp"
#include "gcnn/error.hpp"
#include "gcnn/fhe_core.hpp"
#include "gcnn/gates.hpp"
#include "support.hpp"

using namespace gcnn;

namespace {

bool throws_kind(ErrorKind kind, auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind() == kind;
    }
    return false;
}

}  // namespace

TEST_SUITE("fhe_core") {
    TEST_CASE("parameter invariants hold for the presets") {
        for (const FheParams& p : {FheParams::toy(), FheParams::demo()}) {
            CHECK(p.ct_dim == (p.lattice_dim + 1) * p.log_q);
            CHECK(p.modulus == (std::uint64_t{1} << p.log_q));
            CHECK(p.noise_stddev * 2 < p.noise_budget);
            CHECK(p.noise_budget == static_cast<double>(p.modulus) / 4.0);
        }
        CHECK(FheParams::toy().lattice_dim == 8);
        CHECK(FheParams::toy().log_q == 12);
        CHECK(FheParams::demo().lattice_dim == 32);
        CHECK(FheParams::demo().log_q == 16);
        CHECK(FheParams::from_name("toy") == FheParams::toy());
        CHECK(throws_kind(ErrorKind::Parameter, [] { (void)FheParams::from_name("bogus"); }));
    }

    TEST_CASE("invalid parameters are rejected") {
        FheParams p = FheParams::make(4, 10, 1.0);
        p.modulus = 1000;
        CHECK(throws_kind(ErrorKind::Parameter, [&] { p.validate(); }));
        CHECK(throws_kind(ErrorKind::Parameter, [&] { (void)keygen(p, 1); }));
        FheParams q = FheParams::make(4, 10, 1.0);
        q.ct_dim += 1;
        CHECK(throws_kind(ErrorKind::Parameter, [&] { (void)keygen(q, 1); }));
    }

    TEST_CASE("keygen shape and determinism") {
        const FheParams p = FheParams::make(4, 10, 1.0);
        const SecretKey k1 = keygen(p, 1);
        const SecretKey k2 = keygen(p, 1);
        CHECK(k1.secret_vector.size() == 5);
        CHECK(k1.secret_vector.back() == 1);
        CHECK(k1 == k2);
        CHECK_FALSE(k1 == keygen(p, 2));
        for (auto v : k1.secret_vector) CHECK(v < p.modulus);
        CHECK(k1.expanded().size() == p.ct_dim);
    }

    TEST_CASE("encrypt/decrypt roundtrip over 1000 seeds per bit at every preset") {
        for (const FheParams& p : {FheParams::toy(), FheParams::demo()}) {
            const SecretKey sk = keygen(p, 42);
            const std::size_t trials = p.preset == Preset::Toy ? 1000 : 200;
            for (int bit = 0; bit <= 1; ++bit) {
                std::size_t ok = 0;
                for (std::size_t s = 0; s < trials; ++s) {
                    const Ciphertext ct = encrypt_bit(sk, bit, mix64(s * 2 + bit));
                    ok += decrypt_bit(sk, ct) == static_cast<bool>(bit);
                    if (s < 20) {
                        CHECK(ct.noise_estimate() <= p.fresh_noise_bound());
                        CHECK(static_cast<double>(measure_noise(sk, ct, bit)) <= ct.noise_estimate());
                    }
                }
                CHECK(ok == trials);
            }
        }
    }

    TEST_CASE("ciphertext entries lie in [0, q)") {
        const SecretKey sk = keygen(FheParams::toy(), 3);
        const Ciphertext ct = encrypt_bit(sk, true, 9);
        CHECK(ct.matrix().size() == ct.dim() * ct.dim());
        for (auto v : ct.matrix()) CHECK(v < sk.params.modulus);
    }

    TEST_CASE("NAND truth table over 1000 random encryptions per row") {
        const FheParams p = FheParams::toy();
        const SecretKey sk = keygen(p, 5);
        for (int a = 0; a <= 1; ++a) {
            for (int b = 0; b <= 1; ++b) {
                std::size_t ok = 0;
                for (std::size_t s = 0; s < 1000; ++s) {
                    const Ciphertext ca = encrypt_bit(sk, a, mix64(4 * s + 2 * a + b));
                    const Ciphertext cb = encrypt_bit(sk, b, mix64(~(4 * s + 2 * a + b)));
                    const Ciphertext out = nand(p, ca, cb);
                    ok += decrypt_bit(sk, out) == !(a && b);
                    if (s < 10) {
                        CHECK(out.noise_estimate() > std::max(ca.noise_estimate(), cb.noise_estimate()));
                        CHECK(static_cast<double>(measure_noise(sk, out, !(a && b))) <= out.noise_estimate());
                    }
                }
                CHECK(ok == 1000);
            }
        }
    }

    TEST_CASE("rated depth and noise exhaustion") {
        const FheParams p = FheParams::toy();
        const unsigned depth = p.rated_depth(p.noise_budget);
        CHECK(depth == 1);
        CHECK(p.rated_depth(p.noise_budget / 2) == 1);
        const SecretKey sk = keygen(p, 6);

        // A depth-1 tree over fresh inputs decrypts; one more level exhausts the budget.
        const Ciphertext x = nand(p, encrypt_bit(sk, true, 1), encrypt_bit(sk, true, 2));
        const Ciphertext y = nand(p, encrypt_bit(sk, false, 3), encrypt_bit(sk, true, 4));
        CHECK(decrypt_bit(sk, x) == false);
        CHECK(decrypt_bit(sk, y) == true);
        CHECK(throws_kind(ErrorKind::NoiseExhausted, [&] { (void)nand(p, x, y); }));

        const Ciphertext spent(p.ct_dim, x.matrix(), p.noise_budget);
        CHECK(throws_kind(ErrorKind::NoiseExhausted, [&] { (void)decrypt_bit(sk, spent); }));
    }

    TEST_CASE("refresh at the rated depth doubles the usable chain") {
        const FheParams p = FheParams::toy();
        const SecretKey sk = keygen(p, 8);
        const Ciphertext x = nand(p, encrypt_bit(sk, true, 1), encrypt_bit(sk, true, 2));
        const Ciphertext y = nand(p, encrypt_bit(sk, false, 3), encrypt_bit(sk, false, 4));
        const Ciphertext rx = refresh(sk, x, 10);
        const Ciphertext ry = refresh(sk, y, 11);
        CHECK(rx.noise_estimate() < x.noise_estimate());
        CHECK(rx.noise_estimate() == p.fresh_noise_bound());
        const Ciphertext z = nand(p, rx, ry);
        CHECK(decrypt_bit(sk, z) == !(false && true));
        CHECK(decrypt_bit(sk, refresh(sk, encrypt_bit(sk, true, 12), 13)) == true);
    }

    TEST_CASE("trivial constants") {
        const FheParams p = FheParams::toy();
        const SecretKey sk = keygen(p, 9);
        const Ciphertext one = Ciphertext::trivial(p.ct_dim, true);
        const Ciphertext zero = Ciphertext::trivial(p.ct_dim, false);
        CHECK(one.noise_estimate() == 0.0);
        CHECK(decrypt_bit(sk, one));
        CHECK_FALSE(decrypt_bit(sk, zero));
        for (int bit = 0; bit <= 1; ++bit) {
            const Ciphertext x = encrypt_bit(sk, bit, 100 + bit);
            const Ciphertext not_x = nand(p, one, x);
            CHECK(decrypt_bit(sk, not_x) == !bit);
            CHECK(not_x.noise_estimate() == x.noise_estimate());
            CHECK(static_cast<double>(measure_noise(sk, not_x, !bit)) <= not_x.noise_estimate());
            CHECK(decrypt_bit(sk, nand(p, zero, x)) == true);
        }
    }

    TEST_CASE("tracked estimate bounds the measured error on random chains") {
        const FheParams p = FheParams::toy();
        auto sk = std::make_shared<const SecretKey>(keygen(p, 10));
        GswBackend be(sk, 77);
        Rng rng(3);
        for (int trial = 0; trial < 20; ++trial) {
            bool va = rng.bits(1);
            EncBit a = be.encrypt(va, rng.next());
            for (int step = 0; step < 12; ++step) {
                const bool vb = rng.bits(1);
                a = be.nand(a, be.encrypt(vb, rng.next()));
                va = !(va && vb);
                const auto& ct = *a.ciphertext();
                CHECK(static_cast<double>(measure_noise(*sk, ct, va)) <= ct.noise_estimate());
                CHECK(ct.noise_estimate() < p.noise_budget);
                CHECK(be.decrypt(a) == va);
            }
        }
        CHECK(be.stats().refresh_count() > 0);
        CHECK(be.stats().max_noise_seen() < p.noise_budget);
    }

    TEST_CASE("manual refresh policy surfaces exhaustion") {
        const FheParams p = FheParams::toy();
        auto sk = std::make_shared<const SecretKey>(keygen(p, 11));
        GswBackend be(sk, 1, RefreshPolicy::Manual);
        EncBit a = be.nand(be.encrypt(true, 1), be.encrypt(true, 2));
        EncBit b = be.nand(be.encrypt(true, 3), be.encrypt(false, 4));
        CHECK(throws_kind(ErrorKind::NoiseExhausted, [&] { (void)be.nand(a, b); }));
        EncBit c = be.nand(be.refresh(a), be.refresh(b));
        CHECK(be.decrypt(c) == true);
        CHECK(be.stats().refresh_count() == 2);
    }

    TEST_CASE("backend refresh is independent of call order") {
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 12));
        GswBackend be1(sk, 5);
        GswBackend be2(sk, 5);
        const EncBit x = be1.encrypt(true, 3);
        const EncBit y = be1.encrypt(false, 4);
        (void)be2.refresh(y);
        CHECK(*be1.refresh(x).ciphertext() == *be2.refresh(x).ciphertext());
    }

    TEST_CASE("clear and gsw backends agree on a width-8 adder chain") {
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 13));
        GswBackend gsw(sk, 99);
        ClearBackend clear;
        Rng rng(17);
        for (int trial = 0; trial < 3; ++trial) {
            const std::int64_t x = test::random_signed(rng, 8);
            const std::int64_t y = test::random_signed(rng, 8);
            const std::uint64_t seed = rng.next();
            const BitVector gs = add(gsw, encrypt_vector(gsw, x, 8, seed), encrypt_vector(gsw, y, 8, seed + 1));
            const BitVector cs = add(clear, encrypt_vector(clear, x, 8, seed), encrypt_vector(clear, y, 8, seed + 1));
            CHECK(decrypt_vector(gsw, gs) == decrypt_vector(clear, cs));
            CHECK(decrypt_vector(gsw, gs) == test::wrap(x + y, 8));
        }
        CHECK(gsw.stats().nand_count() == clear.stats().nand_count());
    }

    TEST_CASE("mixing backends is a usage error") {
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 14));
        GswBackend gsw(sk, 1);
        ClearBackend clear;
        const EncBit c = clear.encrypt(true, 0);
        const EncBit g = gsw.encrypt(true, 0);
        CHECK(throws_kind(ErrorKind::Usage, [&] { (void)gsw.nand(c, g); }));
        CHECK(throws_kind(ErrorKind::Usage, [&] { (void)clear.nand(c, g); }));
    }
}
