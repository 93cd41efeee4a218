// SPDX-License-Identifier: Apache-2.0
//
// Oracles and helpers shared by the test binaries.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gcnn/cnn.hpp"
#include "gcnn/rng.hpp"

namespace gcnn::test {

inline std::string data_path(const std::string& rel) { return std::string(GCNN_DATA_DIR) + "/" + rel; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("gcnn-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Two's-complement wrap of v to `width` bits.
inline std::int64_t wrap(std::int64_t v, unsigned width) {
    if (width >= 64) return v;
    const auto u = static_cast<std::uint64_t>(v) & ((std::uint64_t{1} << width) - 1);
    const bool neg = (u >> (width - 1)) & 1u;
    return neg ? static_cast<std::int64_t>(u | (~std::uint64_t{0} << width)) : static_cast<std::int64_t>(u);
}

inline std::int64_t random_signed(Rng& rng, unsigned width) {
    return wrap(static_cast<std::int64_t>(rng.bits(width)), width);
}

/// floor(a / 2^f) for signed a.
inline std::int64_t floor_shift(std::int64_t a, unsigned f) {
    const std::int64_t d = std::int64_t{1} << f;
    std::int64_t q = a / d;
    if (a % d != 0 && a < 0) --q;
    return q;
}

/// Integer oracle for fp_mul: floor(za * zb / 2^f) wrapped to w bits.
inline std::int64_t fixed_mul(std::int64_t za, std::int64_t zb, const FixedPointFormat& fmt) {
    const __int128 p = static_cast<__int128>(za) * zb;
    const __int128 d = __int128{1} << fmt.frac_bits;
    __int128 q = p / d;
    if (p % d != 0 && p < 0) --q;
    return wrap(static_cast<std::int64_t>(q), fmt.total_bits);
}

/// Integer oracle of dot_product: floor-encoded weights and bias, per-term
/// floor rescaling, wraparound additions.
inline std::int64_t fixed_dot(const std::vector<std::int64_t>& inputs, const std::vector<double>& weights,
                              double bias, const FixedPointFormat& fmt) {
    std::int64_t acc = fmt.quantize(bias);
    for (std::size_t i = 0; i < inputs.size(); ++i)
        acc = wrap(acc + fixed_mul(inputs[i], fmt.quantize(weights[i]), fmt), fmt.total_bits);
    return acc;
}

/// Random network with the requested layer count; widths <= 8, kernels <= 3.
inline NetworkSpec random_network(Rng& rng, std::size_t layers, FixedPointFormat fmt = {32, 16}) {
    NetworkSpec net;
    net.format = fmt;
    const std::size_t convs = layers - 1;
    const std::size_t channels = 1 + rng.bits(1);
    // Pick conv/pool stages whose input side stays within 8.
    std::vector<std::pair<std::size_t, std::size_t>> stages;  // (kernel, pool)
    std::size_t side = 0;
    do {
        stages.clear();
        for (std::size_t i = 0; i < convs; ++i) stages.push_back({1 + rng.bits(8) % 3, 1 + rng.bits(1)});
        side = 1 + rng.bits(1);
        for (auto it = stages.rbegin(); it != stages.rend(); ++it) side = side * it->second + it->first - 1;
    } while (side > 8);
    net.input = {channels, side, side};
    Shape cur = net.input;
    for (std::size_t i = 0; i < convs; ++i) {
        const std::size_t out = 1 + rng.bits(8) % 3;
        LayerSpec l = LayerSpec::convolution(cur.channels, out, stages[i].first, stages[i].second,
                                             rng.bits(1) ? Activation::Relu : Activation::Linear);
        cur = l.output_shape(cur);
        net.layers.push_back(std::move(l));
    }
    const std::size_t in = cur.size();
    net.layers.push_back(LayerSpec::fully_connected(in, 1 + rng.bits(8) % 8, Activation::Linear));
    for (auto& l : net.layers) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.weight_count() / l.out_channels));
        for (auto& w : l.weights) w = rng.uniform(-1.5, 1.5) * scale;
        for (auto& b : l.biases) b = rng.uniform(-0.5, 0.5);
    }
    return net;
}

inline std::vector<double> random_image(Rng& rng, const Shape& shape) {
    std::vector<double> v(shape.size());
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

}  // namespace gcnn::test
