// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <memory>
#include <sstream>

#include "gcnn/backend.hpp"
#include "gcnn/error.hpp"
#include "gcnn/model_io.hpp"
#include "gcnn/serialization.hpp"
#include "support.hpp"

using namespace gcnn;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::Usage;
}

std::string bytes_of(auto&& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
}

const char* kModel = R"(gcnn-model 1
format 16 8
input 1 4 4
layer conv 1 1 3 2 relu   # comment
weights 9
1 0 0 0 1 0 0 0 1
biases 1
0.5
layer fc 1 2 linear
weights 2
1 -1
biases 2
0 0.25
end
)";

}  // namespace

TEST_SUITE("serialization") {
    TEST_CASE("secret key roundtrip is bit-exact") {
        for (const FheParams& p : {FheParams::toy(), FheParams::demo()}) {
            const SecretKey sk = keygen(p, 7);
            const std::string bytes = bytes_of([&](std::ostream& o) { write_secret_key(o, sk); });
            CHECK(bytes.substr(0, 4) == "GCN1");
            std::istringstream in(bytes);
            const SecretKey back = read_secret_key(in);
            CHECK(back == sk);
            CHECK(bytes_of([&](std::ostream& o) { write_secret_key(o, back); }) == bytes);
        }
    }

    TEST_CASE("gsw bundle roundtrip is bit-exact") {
        auto sk = std::make_shared<const SecretKey>(keygen(FheParams::toy(), 8));
        GswBackend be(sk, 1);
        const FixedPointFormat fmt{8, 4};
        CipherBundle b;
        b.backend = BackendKind::Gsw;
        b.params = sk->params;
        b.format = fmt;
        b.shape = {1, 1, 2};
        b.values = {encode(be, 0.75, fmt, 1), encode_public(be, -0.5, fmt)};
        const std::string bytes = bytes_of([&](std::ostream& o) { write_bundle(o, b); });
        std::istringstream in(bytes);
        const CipherBundle back = read_bundle(in);
        CHECK(back.shape == b.shape);
        CHECK(back.format == fmt);
        REQUIRE(back.values.size() == 2);
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t i = 0; i < fmt.total_bits; ++i)
                CHECK(*back.values[v].bits[i].ciphertext() == *b.values[v].bits[i].ciphertext());
        CHECK(decode(be, back.values[0]) == 0.75);
        CHECK(decode(be, back.values[1]) == -0.5);
        CHECK(bytes_of([&](std::ostream& o) { write_bundle(o, back); }) == bytes);
    }

    TEST_CASE("clear bundle record count") {
        ClearBackend be;
        const FixedPointFormat fmt{32, 16};
        CipherBundle b;
        b.format = fmt;
        b.shape = {1, 28, 28};
        const EncImage img = encrypt_image(be, b.shape, std::vector<double>(784, 0.25), fmt, 1);
        b.values = img.values;
        const std::string bytes = bytes_of([&](std::ostream& o) { write_bundle(o, b); });
        const std::size_t header = 24 + 4 + 12 + 8;
        CHECK(bytes.size() == header + 28 * 28 * 32);
    }

    TEST_CASE("corrupt input is a format error") {
        const SecretKey sk = keygen(FheParams::toy(), 9);
        std::string bytes = bytes_of([&](std::ostream& o) { write_secret_key(o, sk); });
        std::istringstream truncated(bytes.substr(0, bytes.size() - 1));
        CHECK(kind_of([&] { (void)read_secret_key(truncated); }) == ErrorKind::Format);
        bytes[0] = 'X';
        std::istringstream bad_magic(bytes);
        CHECK(kind_of([&] { (void)read_secret_key(bad_magic); }) == ErrorKind::Format);
        std::istringstream empty("");
        CHECK(kind_of([&] { (void)read_bundle(empty); }) == ErrorKind::Format);
    }

    TEST_CASE("files are written atomically and reload") {
        const auto dir = test::scratch_dir("io");
        const SecretKey sk = keygen(FheParams::toy(), 10);
        const std::string path = (dir / "k.key").string();
        save_secret_key(path, sk);
        CHECK(load_secret_key(path) == sk);
        save_file_atomic(path, "replaced");
        CHECK(load_file(path) == "replaced");
        std::size_t entries = 0;
        for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++entries;
        CHECK(entries == 1);
        CHECK(kind_of([&] { (void)load_file((dir / "missing").string()); }) == ErrorKind::Io);
        CHECK(kind_of([&] { save_file_atomic((dir / "no/such/dir/f").string(), "x"); }) == ErrorKind::Io);
    }
}

TEST_SUITE("model_io") {
    TEST_CASE("parse a model") {
        std::istringstream in(kModel);
        const NetworkSpec net = parse_model(in);
        CHECK(net.format == FixedPointFormat{16, 8});
        CHECK(net.input == Shape{1, 4, 4});
        REQUIRE(net.layers.size() == 2);
        CHECK(net.layers[0].kind == LayerKind::Convolution);
        CHECK(net.layers[0].pool_size == 2);
        CHECK(net.layers[1].activation == Activation::Linear);
        CHECK(net.layers[1].biases[1] == 0.25);
    }

    TEST_CASE("write then parse is lossless") {
        Rng rng(41);
        const NetworkSpec net = test::random_network(rng, 3);
        std::ostringstream out;
        write_model(out, net);
        std::istringstream in(out.str());
        const NetworkSpec back = parse_model(in);
        REQUIRE(back.layers.size() == net.layers.size());
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            CHECK(back.layers[i].weights == net.layers[i].weights);
            CHECK(back.layers[i].biases == net.layers[i].biases);
        }
        std::ostringstream again;
        write_model(again, back);
        CHECK(again.str() == out.str());
    }

    TEST_CASE("malformed models carry line numbers") {
        std::string text = kModel;
        text.replace(text.find("weights 2"), 9, "weights 3");
        std::istringstream in(text);
        try {
            (void)parse_model(in);
            FAIL("expected a format error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
            CHECK(std::string(e.what()).find("line") != std::string::npos);
        }
        std::istringstream garbage("gcnn-model 1\nformat 16 8\ninput 1 4 4\nlayer pool\nend\n");
        CHECK(kind_of([&] { (void)parse_model(garbage); }) == ErrorKind::Format);
        std::istringstream bad_number("gcnn-model 1\nformat 16 x\n");
        CHECK(kind_of([&] { (void)parse_model(bad_number); }) == ErrorKind::Format);
        std::istringstream huge(
            "gcnn-model 1\nformat 16 8\ninput 1 1 1\nlayer fc 1 1 linear\nweights 1\n1000\nbiases 1\n0\nend\n");
        CHECK(kind_of([&] { (void)parse_model(huge); }) == ErrorKind::Format);
        std::istringstream empty_net("gcnn-model 1\nformat 32 16\ninput 1 2 2\nend\n");
        CHECK(parse_model(empty_net).layers.empty());
    }

    TEST_CASE("shipped models load") {
        const NetworkSpec tiny = load_model(test::data_path("models/tiny.model"));
        CHECK(tiny.class_count() == 2);
        const NetworkSpec digits = load_model(test::data_path("models/digits.model"));
        CHECK(digits.shapes() == preset_architecture().shapes());
        CHECK(digits.format == FixedPointFormat{32, 16});
    }

    TEST_CASE("PGM images") {
        GrayImage img{2, 3, {0, 255, 128, 10, 20, 30}};
        std::ostringstream out;
        write_pgm(out, img);
        std::istringstream in(out.str());
        const GrayImage back = read_pgm(in);
        CHECK(back.height == 2);
        CHECK(back.width == 3);
        CHECK(back.pixels == img.pixels);
        std::istringstream ascii("P2\n# c\n2 1\n255\n0 255\n");
        CHECK(read_pgm(ascii).pixels == std::vector<std::uint8_t>{0, 255});
        CHECK(pixel_to_real(0) == -1.0);
        CHECK(pixel_to_real(255) == 1.0);
        std::istringstream wide("P5\n1 1\n65535\n\0\0");
        CHECK(kind_of([&] { (void)read_pgm(wide); }) == ErrorKind::Format);
    }

    TEST_CASE("CSV images") {
        std::istringstream in("0.5, -1\n1,0\n");
        const auto rows = read_csv(in);
        CHECK(rows == std::vector<std::vector<double>>{{0.5, -1.0}, {1.0, 0.0}});
        std::istringstream out_of_range("2,0\n");
        CHECK(kind_of([&] { (void)read_csv(out_of_range); }) == ErrorKind::Range);
        std::istringstream ragged("1,0\n1\n");
        CHECK(kind_of([&] { (void)read_csv(ragged); }) == ErrorKind::Format);
    }

    TEST_CASE("image loading checks the shape") {
        const auto pixels = load_image(test::data_path("digits/digit_00_label2.pgm"), Shape{1, 28, 28});
        CHECK(pixels.size() == 784);
        try {
            (void)load_image(test::data_path("tiny/vertical.csv"), Shape{1, 28, 28});
            FAIL("expected a shape error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Shape);
            CHECK(std::string(e.what()).find("1x6x6") != std::string::npos);
            CHECK(std::string(e.what()).find("1x28x28") != std::string::npos);
        }
        CHECK(kind_of([&] { (void)load_image("/nonexistent.pgm", Shape{1, 1, 1}); }) == ErrorKind::Io);
    }
}
