// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>

#include "gcnn/backend.hpp"
#include "gcnn/cnn.hpp"
#include "gcnn/error.hpp"
#include "gcnn/fhe_core.hpp"
#include "gcnn/model_io.hpp"
#include "support.hpp"

using namespace gcnn;

namespace {

const FixedPointFormat kFmt{32, 16};

std::vector<std::int64_t> raws(BitBackend& be, const std::vector<FixedPointCipher>& xs) {
    std::vector<std::int64_t> out;
    for (const auto& x : xs) out.push_back(decode_raw(be, x));
    return out;
}

}  // namespace

TEST_SUITE("cnn") {
    TEST_CASE("preset shape algebra") {
        const NetworkSpec net = preset_architecture();
        const auto shapes = net.shapes();
        REQUIRE(shapes.size() == 4);
        CHECK(shapes[0] == Shape{1, 28, 28});
        CHECK(shapes[1] == Shape{4, 12, 12});
        CHECK(shapes[2] == Shape{15, 4, 4});
        CHECK(shapes[3].size() == 10);
        CHECK(net.layers[2].in_channels == 240);
        CHECK(net.layers[1].weight_count() == 15 * 4 * 5 * 5);
        CHECK(net.class_count() == 10);
        CHECK_NOTHROW(net.validate());
    }

    TEST_CASE("layer shape errors") {
        const LayerSpec odd = LayerSpec::convolution(1, 1, 2, 2);
        CHECK_THROWS_AS((void)odd.output_shape(Shape{1, 6, 6}), Error);  // 5 not divisible by 2
        CHECK_THROWS_AS((void)LayerSpec::convolution(2, 1, 3, 1).output_shape(Shape{1, 6, 6}), Error);
        NetworkSpec no_fc;
        no_fc.input = {1, 4, 4};
        no_fc.layers.push_back(LayerSpec::convolution(1, 1, 3, 1));
        CHECK_THROWS_AS(no_fc.validate(), Error);
    }

    TEST_CASE("flatten order") {
        CHECK(flatten_index(0, 0, 0, 4, 4) == 0);
        CHECK(flatten_index(1, 0, 0, 4, 4) == 16);
        std::set<std::size_t> seen;
        for (std::size_t c = 0; c < 15; ++c)
            for (std::size_t r = 0; r < 4; ++r)
                for (std::size_t k = 0; k < 4; ++k) seen.insert(flatten_index(c, r, k, 4, 4));
        CHECK(seen.size() == 240);
        CHECK(*seen.rbegin() == 239);
    }

    TEST_CASE("dot product small cases") {
        ClearBackend be;
        const std::vector<FixedPointCipher> one{encode(be, 0.5, kFmt, 1)};
        CHECK(decode(be, dot_product(be, one, std::vector{1.0}, 0.0)) == 0.5);
        const std::vector<FixedPointCipher> two{encode(be, 0.5, kFmt, 1), encode(be, -0.5, kFmt, 2)};
        CHECK(decode(be, dot_product(be, two, std::vector{1.0, 1.0}, 0.25)) == 0.25);
        CHECK_THROWS_AS((void)dot_product(be, two, std::vector{1.0}, 0.0), Error);
    }

    TEST_CASE("dot product against integer and real oracles") {
        ClearBackend be;
        Rng rng(8);
        const double delta = kFmt.resolution();
        std::size_t exact = 0;
        for (int t = 0; t < 1000; ++t) {
            std::vector<double> x(25), w(25);
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
            for (auto& v : w) v = rng.uniform(-0.5, 0.5);
            const double bias = rng.uniform(-0.5, 0.5);
            std::vector<FixedPointCipher> enc;
            std::vector<std::int64_t> zx;
            for (int i = 0; i < 25; ++i) {
                enc.push_back(encode(be, x[i], kFmt, i));
                zx.push_back(kFmt.quantize(x[i]));
            }
            const FixedPointCipher got = dot_product(be, enc, w, bias);
            exact += decode_raw(be, got) == test::fixed_dot(zx, w, bias, kFmt);

            double real = bias, norm = 0.0, abs_x = 0.0;
            for (int i = 0; i < 25; ++i) {
                real += x[i] * w[i];
                norm += w[i] * w[i];
                abs_x += std::abs(x[i]);
            }
            // Input floor error through the weights, plus weight/bias flooring
            // and one rescaling floor per product.
            const double bound = delta * std::sqrt(25.0) * std::sqrt(norm) + delta * abs_x + delta + 25 * delta +
                                 25 * delta * delta;
            CHECK(std::abs(decode(be, got) - real) <= bound);
        }
        CHECK(exact == 1000);
    }

    TEST_CASE("identity kernel reproduces the interior") {
        ClearBackend be;
        LayerSpec id = LayerSpec::convolution(1, 1, 3, 1, Activation::Linear);
        id.weights[4] = 1.0;
        const Shape in{1, 5, 5};
        Rng rng(9);
        const auto pixels = test::random_image(rng, in);
        const EncImage img = encrypt_image(be, in, pixels, kFmt, 1);
        const EncImage out = conv_layer(be, img, id);
        CHECK(out.shape == Shape{1, 3, 3});
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                CHECK(decode_raw(be, out.at(0, r, c)) == decode_raw(be, img.at(0, r + 1, c + 1)));
    }

    TEST_CASE("fully connected layer against the integer oracle") {
        ClearBackend be;
        Rng rng(10);
        LayerSpec fc = LayerSpec::fully_connected(8, 3);
        for (auto& w : fc.weights) w = rng.uniform(-1.0, 1.0);
        for (auto& b : fc.biases) b = rng.uniform(-1.0, 1.0);
        std::vector<FixedPointCipher> feats;
        std::vector<std::int64_t> z;
        for (int i = 0; i < 8; ++i) {
            const double v = rng.uniform(-1.0, 1.0);
            feats.push_back(encode(be, v, kFmt, i));
            z.push_back(kFmt.quantize(v));
        }
        const EncScores s = fc_layer(be, feats, fc);
        REQUIRE(s.scores.size() == 3);
        for (std::size_t o = 0; o < 3; ++o) {
            const auto w = fc.weights_of(o);
            CHECK(decode_raw(be, s.scores[o]) ==
                  test::fixed_dot(z, std::vector<double>(w.begin(), w.end()), fc.biases[o], kFmt));
        }
        LayerSpec zero = LayerSpec::fully_connected(8, 2);
        for (const auto& v : fc_layer(be, feats, zero).scores) CHECK(decode_raw(be, v) == 0);
    }

    TEST_CASE("zero-weight network yields its biases") {
        ClearBackend be;
        NetworkSpec net = preset_architecture();
        net.input = {1, 8, 8};
        net.layers = {LayerSpec::convolution(1, 2, 3, 2), LayerSpec::fully_connected(18, 3)};
        net.layers[1].biases = {0.5, -0.25, 0.125};
        Rng rng(11);
        const auto pixels = test::random_image(rng, net.input);
        const auto scores = decrypt_scores(be, classify(be, encrypt_image(be, net.input, pixels, net.format, 1), net));
        CHECK(scores == std::vector<double>{0.5, -0.25, 0.125});
    }

    TEST_CASE("classify matches the integer oracle of a one-layer network") {
        ClearBackend be;
        Rng rng(12);
        NetworkSpec net;
        net.format = kFmt;
        net.input = {1, 2, 2};
        net.layers = {LayerSpec::fully_connected(4, 3)};
        for (auto& w : net.layers[0].weights) w = rng.uniform(-1.0, 1.0);
        const auto pixels = test::random_image(rng, net.input);
        std::vector<std::int64_t> z;
        for (double p : pixels) z.push_back(kFmt.quantize(p));
        const auto scores = classify(be, encrypt_image(be, net.input, pixels, kFmt, 3), net);
        const auto got = raws(be, scores.scores);
        for (std::size_t o = 0; o < 3; ++o) {
            const auto w = net.layers[0].weights_of(o);
            CHECK(got[o] == test::fixed_dot(z, std::vector<double>(w.begin(), w.end()), 0.0, kFmt));
        }
    }

    TEST_CASE("results do not depend on the worker count") {
        Rng rng(13);
        const NetworkSpec net = test::random_network(rng, 3);
        const auto pixels = test::random_image(rng, net.input);
        std::vector<std::int64_t> base;
        std::uint64_t nands = 0;
        for (std::size_t workers : {1u, 2u, 5u}) {
            ClearBackend be;
            InferenceOptions opt;
            opt.workers = workers;
            const auto got = raws(be, classify(be, encrypt_image(be, net.input, pixels, net.format, 1), net, opt).scores);
            if (base.empty()) {
                base = got;
                nands = be.stats().nand_count();
            }
            CHECK(got == base);
            CHECK(be.stats().nand_count() == nands);
        }
    }

    TEST_CASE("encrypted weights give identical outputs") {
        Rng rng(14);
        const NetworkSpec net = test::random_network(rng, 2);
        const auto pixels = test::random_image(rng, net.input);
        ClearBackend be;
        InferenceOptions enc;
        enc.encrypt_weights = true;
        enc.weight_seed = 99;
        const EncImage img = encrypt_image(be, net.input, pixels, net.format, 1);
        CHECK(raws(be, classify(be, img, net).scores) == raws(be, classify(be, img, net, enc).scores));
    }

    TEST_CASE("trivial and encrypted weights agree on gsw") {
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 21));
        GswBackend be(sk, 4);
        const FixedPointFormat fmt{8, 4};
        Rng rng(15);
        std::vector<FixedPointCipher> xs;
        std::vector<double> ws;
        for (int i = 0; i < 2; ++i) {
            xs.push_back(encode(be, rng.uniform(-1.0, 1.0), fmt, rng.next()));
            ws.push_back(rng.uniform(-1.0, 1.0));
        }
        const FixedPointCipher pub = dot_product(be, xs, ws, 0.25);
        std::vector<FixedPointCipher> wenc;
        for (double w : ws) wenc.push_back(encode(be, w, fmt, rng.next()));
        const FixedPointCipher priv = dot_product(be, xs, wenc, encode(be, 0.25, fmt, rng.next()));
        CHECK(decode_raw(be, pub) == decode_raw(be, priv));
    }

    TEST_CASE("classify traces depend only on network shapes") {
        Rng rng(16);
        const NetworkSpec net = test::random_network(rng, 2);
        auto trace = [&](std::uint64_t seed) {
            Rng r(seed);
            ClearBackend be;
            be.start_trace();
            (void)classify(be, encrypt_image(be, net.input, test::random_image(r, net.input), net.format, seed), net);
            return be.trace_digest();
        };
        CHECK(trace(1) == trace(2));
    }

    TEST_CASE("tiny network: gsw toy preset decrypts bit-identical to clear") {
        const NetworkSpec net = load_model(test::data_path("models/tiny.model"));
        CHECK(net.input == Shape{1, 6, 6});
        const auto pixels = load_image(test::data_path("tiny/gradient.csv"), net.input);
        ClearBackend clear;
        const auto expected =
            raws(clear, classify(clear, encrypt_image(clear, net.input, pixels, net.format, 5), net).scores);
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 31));
        GswBackend gsw(sk, 8);
        InferenceOptions opt;
        opt.workers = 2;
        const auto got = raws(gsw, classify(gsw, encrypt_image(gsw, net.input, pixels, net.format, 5), net, opt).scores);
        CHECK(got == expected);
        CHECK(gsw.stats().nand_count() == clear.stats().nand_count());
        CHECK(gsw.stats().max_noise_seen() < sk->params.noise_budget);
    }

    TEST_CASE("reference forward and argmax") {
        CHECK(argmax(std::vector{0.1, 0.9, 0.3}) == 1);
        CHECK(argmax(std::vector{0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 2.0}) == 2);
        CHECK_THROWS_AS((void)argmax(std::vector<double>{}), Error);
        NetworkSpec net;
        net.format = kFmt;
        net.input = {1, 1, 2};
        net.layers = {LayerSpec::fully_connected(2, 1)};
        net.layers[0].weights = {2.0, -1.0};
        net.layers[0].biases = {0.5};
        CHECK(reference_forward(net, std::vector{0.25, 0.5}) == std::vector{0.5});
    }

    TEST_CASE("image shape mismatch is reported before evaluation") {
        ClearBackend be;
        const NetworkSpec net = load_model(test::data_path("models/tiny.model"));
        const EncImage img = encrypt_image(be, Shape{1, 5, 5}, std::vector<double>(25, 0.0), net.format, 1);
        be.stats().reset();
        CHECK_THROWS_AS((void)classify(be, img, net), Error);
        CHECK(be.stats().nand_count() == 0);
    }
}
