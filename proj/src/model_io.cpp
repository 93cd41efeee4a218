// SPDX-License-Identifier: Apache-2.0

#include "gcnn/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gcnn/error.hpp"
#include "gcnn/serialization.hpp"

namespace gcnn {

namespace {

class Tokens {
public:
    explicit Tokens(std::istream& in) {
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) items_.push_back({tok, line_no});
        }
    }

    bool done() const { return pos_ >= items_.size(); }

    const std::string& next(const char* what) {
        if (done()) fail(ErrorKind::Format, std::string("model ends early: expected ") + what);
        return items_[pos_++].text;
    }

    void expect(const char* word) {
        const std::string& tok = next(word);
        if (tok != word) error(std::string("expected '") + word + "', found '" + tok + "'");
    }

    std::size_t count(const char* what) {
        const std::string& tok = next(what);
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) error(std::string("bad ") + what + " '" + tok + "'");
        return v;
    }

    double real(const char* what) {
        const std::string& tok = next(what);
        double v = 0.0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
            error(std::string("bad ") + what + " '" + tok + "'");
        return v;
    }

    [[noreturn]] void error(const std::string& msg) const {
        const std::size_t line = pos_ == 0 ? 0 : items_[pos_ - 1].line;
        fail(ErrorKind::Format, "model line " + std::to_string(line) + ": " + msg);
    }

private:
    struct Item {
        std::string text;
        std::size_t line;
    };
    std::vector<Item> items_;
    std::size_t pos_ = 0;
};

Activation parse_activation(Tokens& t) {
    const std::string& tok = t.next("activation");
    if (tok == "relu") return Activation::Relu;
    if (tok == "linear") return Activation::Linear;
    t.error("unknown activation '" + tok + "'");
}

std::vector<double> read_block(Tokens& t, const char* name, std::size_t expected) {
    t.expect(name);
    const std::size_t n = t.count("value count");
    if (n != expected)
        t.error(std::string(name) + " count " + std::to_string(n) + " does not match layer dimensions (" +
                std::to_string(expected) + ")");
    std::vector<double> values(n);
    for (auto& v : values) v = t.real(name);
    return values;
}

}  // namespace

NetworkSpec parse_model(std::istream& in) {
    Tokens t(in);
    t.expect("gcnn-model");
    if (t.count("version") != 1) t.error("unsupported model version");
    NetworkSpec net;
    t.expect("format");
    net.format.total_bits = static_cast<unsigned>(t.count("total bits"));
    net.format.frac_bits = static_cast<unsigned>(t.count("fraction bits"));
    try {
        net.format.validate();
    } catch (const Error& e) {
        t.error(e.what());
    }
    t.expect("input");
    net.input.channels = t.count("channels");
    net.input.height = t.count("height");
    net.input.width = t.count("width");
    if (net.input.size() == 0) t.error("empty input shape");

    while (true) {
        const std::string& tok = t.next("'layer' or 'end'");
        if (tok == "end") break;
        if (tok != "layer") t.error("expected 'layer' or 'end', found '" + tok + "'");
        const std::string& kind = t.next("layer kind");
        LayerSpec layer;
        if (kind == "conv") {
            const std::size_t in_ch = t.count("in_channels");
            const std::size_t out_ch = t.count("out_channels");
            const std::size_t k = t.count("kernel size");
            const std::size_t pool = t.count("pool size");
            layer = LayerSpec::convolution(in_ch, out_ch, k, pool, parse_activation(t));
        } else if (kind == "fc") {
            const std::size_t in = t.count("inputs");
            const std::size_t out = t.count("outputs");
            layer = LayerSpec::fully_connected(in, out, parse_activation(t));
        } else {
            t.error("unknown layer kind '" + kind + "'");
        }
        layer.weights = read_block(t, "weights", layer.weight_count());
        layer.biases = read_block(t, "biases", layer.out_channels);
        net.layers.push_back(std::move(layer));
    }
    if (!t.done()) t.error("content after 'end'");

    try {
        (void)net.shapes();
        for (const auto& l : net.layers) {
            for (double w : l.weights) (void)net.format.quantize(w);
            for (double b : l.biases) (void)net.format.quantize(b);
        }
    } catch (const Error& e) {
        fail(ErrorKind::Format, std::string("model is inconsistent: ") + e.what());
    }
    return net;
}

NetworkSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open model '" + path + "'");
    return parse_model(in);
}

void write_model(std::ostream& out, const NetworkSpec& net) {
    out << "gcnn-model 1\n";
    out << "format " << net.format.total_bits << " " << net.format.frac_bits << "\n";
    out << "input " << net.input.channels << " " << net.input.height << " " << net.input.width << "\n";
    out << std::setprecision(17);
    auto block = [&](const char* name, const std::vector<double>& values, std::size_t per_line) {
        out << name << " " << values.size() << "\n";
        for (std::size_t i = 0; i < values.size(); ++i)
            out << values[i] << ((i + 1) % per_line == 0 || i + 1 == values.size() ? "\n" : " ");
    };
    for (const auto& l : net.layers) {
        if (l.kind == LayerKind::Convolution) {
            out << "layer conv " << l.in_channels << " " << l.out_channels << " " << l.kernel_size << " "
                << l.pool_size << " " << to_string(l.activation) << "\n";
            block("weights", l.weights, l.kernel_size);
        } else {
            out << "layer fc " << l.in_channels << " " << l.out_channels << " " << to_string(l.activation) << "\n";
            block("weights", l.weights, 8);
        }
        block("biases", l.biases, 8);
    }
    out << "end\n";
}

void save_model(const std::string& path, const NetworkSpec& net) {
    std::ostringstream out;
    write_model(out, net);
    save_file_atomic(path, out.str());
}

double pixel_to_real(std::uint8_t pixel) noexcept { return static_cast<double>(pixel) / 127.5 - 1.0; }

namespace {

// Next header token of a PGM, skipping whitespace and comments.
std::size_t pgm_number(std::istream& in) {
    int c = in.get();
    while (true) {
        while (c != EOF && std::isspace(c)) c = in.get();
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
            continue;
        }
        break;
    }
    if (c == EOF || !std::isdigit(c)) fail(ErrorKind::Format, "malformed PGM header");
    std::size_t v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + static_cast<std::size_t>(c - '0');
        if (v > 1u << 20) fail(ErrorKind::Format, "PGM header value too large");
        c = in.get();
    }
    return v;  // the single whitespace after the value has been consumed
}

}  // namespace

GrayImage read_pgm(std::istream& in) {
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || (magic[1] != '2' && magic[1] != '5'))
        fail(ErrorKind::Format, "not a PGM image (expected P2 or P5)");
    GrayImage img;
    img.width = pgm_number(in);
    img.height = pgm_number(in);
    const std::size_t maxval = pgm_number(in);
    if (img.width == 0 || img.height == 0) fail(ErrorKind::Format, "PGM has zero size");
    if (maxval == 0 || maxval > 255) fail(ErrorKind::Format, "only 8-bit PGM images are supported");
    img.pixels.resize(img.width * img.height);
    if (magic[1] == '5') {
        in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
        if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
            fail(ErrorKind::Format, "PGM pixel data is truncated");
    } else {
        for (auto& p : img.pixels) {
            std::size_t v = 0;
            if (!(in >> v) || v > maxval) fail(ErrorKind::Format, "bad ASCII PGM pixel");
            p = static_cast<std::uint8_t>(v);
        }
    }
    if (maxval != 255)
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>((p * 255u + maxval / 2) / maxval);
    return img;
}

void write_pgm(std::ostream& out, const GrayImage& img) {
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

std::vector<std::vector<double>> read_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t\r");
            const auto e = cell.find_last_not_of(" \t\r");
            if (b == std::string::npos) fail(ErrorKind::Format, "CSV line " + std::to_string(line_no) + ": empty cell");
            const std::string tok = cell.substr(b, e - b + 1);
            double v = 0.0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
                fail(ErrorKind::Format, "CSV line " + std::to_string(line_no) + ": bad number '" + tok + "'");
            if (v < -1.0 || v > 1.0)
                fail(ErrorKind::Range, "CSV line " + std::to_string(line_no) + ": value outside [-1, 1]");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            fail(ErrorKind::Format, "CSV line " + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> load_image(const std::string& path, const Shape& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open image '" + path + "'");
    const bool is_csv = path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
    std::vector<double> values;
    Shape actual;
    if (is_csv) {
        const auto rows = read_csv(in);
        actual = {1, rows.size(), rows.empty() ? 0 : rows.front().size()};
        if (expected.channels > 1 && actual.height == expected.channels * expected.height)
            actual = {expected.channels, expected.height, actual.width};
        for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
    } else {
        const GrayImage img = read_pgm(in);
        actual = {1, img.height, img.width};
        values.reserve(img.pixels.size());
        for (auto p : img.pixels) values.push_back(pixel_to_real(p));
    }
    if (!(actual == expected))
        fail(ErrorKind::Shape, "image '" + path + "' has shape " + to_string(actual) + ", expected " +
                                   to_string(expected));
    return values;
}

}  // namespace gcnn
