// SPDX-License-Identifier: Apache-2.0
//
// Encrypted CNN inference: valid stride-1 convolutions with bias, ReLU,
// non-overlapping max pooling and fully connected layers, all evaluated
// through the fixed-point circuits.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcnn/fixedpoint.hpp"

namespace gcnn {

enum class LayerKind { Convolution, FullyConnected };
enum class Activation { Relu, Linear };

std::string_view to_string(LayerKind kind) noexcept;
std::string_view to_string(Activation act) noexcept;

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    [[nodiscard]] std::size_t size() const noexcept { return channels * height * width; }
    bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

struct LayerSpec {
    LayerKind kind = LayerKind::Convolution;
    std::size_t in_channels = 0;   // input nodes for FullyConnected
    std::size_t out_channels = 0;  // output nodes for FullyConnected
    std::size_t kernel_size = 0;   // Convolution only
    std::size_t pool_size = 1;     // Convolution only
    /// Convolution: out x in x k x k; FullyConnected: out x in. Row-major.
    std::vector<double> weights;
    std::vector<double> biases;
    Activation activation = Activation::Relu;

    static LayerSpec convolution(std::size_t in, std::size_t out, std::size_t kernel, std::size_t pool,
                                 Activation act = Activation::Relu);
    static LayerSpec fully_connected(std::size_t in, std::size_t out, Activation act = Activation::Linear);

    [[nodiscard]] std::size_t weight_count() const noexcept;
    /// Weights feeding output channel/node `out`.
    [[nodiscard]] std::span<const double> weights_of(std::size_t out) const;
    /// Output shape for `in`; throws ErrorKind::Shape when incompatible.
    [[nodiscard]] Shape output_shape(const Shape& in) const;
};

struct NetworkSpec {
    Shape input;
    FixedPointFormat format;
    std::vector<LayerSpec> layers;

    /// Shapes before the first layer and after each layer.
    [[nodiscard]] std::vector<Shape> shapes() const;
    /// Shape algebra, weight counts, encodability, final FullyConnected layer.
    void validate() const;
    [[nodiscard]] std::size_t class_count() const;
};

/// 28x28 input, 5x5 conv to 4 maps, 2x2 pool, 5x5 conv to 15 maps, 2x2 pool,
/// fully connected 240 -> 10. Weights zero-filled.
NetworkSpec preset_architecture(FixedPointFormat format = {32, 16});

/// (ch, row, col) -> ch*h*w + row*w + col.
constexpr std::size_t flatten_index(std::size_t ch, std::size_t row, std::size_t col, std::size_t height,
                                    std::size_t width) noexcept {
    return ch * height * width + row * width + col;
}

struct EncImage {
    Shape shape;
    std::vector<FixedPointCipher> values;  // flatten_index order

    [[nodiscard]] const FixedPointCipher& at(std::size_t ch, std::size_t row, std::size_t col) const {
        return values[flatten_index(ch, row, col, shape.height, shape.width)];
    }
};

struct EncScores {
    std::vector<FixedPointCipher> scores;
};

struct InferenceOptions {
    std::size_t workers = 1;
    /// Encode the model with BitBackend::encrypt instead of public constants.
    bool encrypt_weights = false;
    std::uint64_t weight_seed = 0;
};

FixedPointCipher dot_product(BitBackend& be, std::span<const FixedPointCipher> inputs, std::span<const double> weights,
                             double bias);
/// Same computation with weights and bias supplied as (possibly encrypted) values.
FixedPointCipher dot_product(BitBackend& be, std::span<const FixedPointCipher> inputs,
                             std::span<const FixedPointCipher> weights, const FixedPointCipher& bias);

EncImage conv_layer(BitBackend& be, const EncImage& img, const LayerSpec& spec, const InferenceOptions& options = {});
EncScores fc_layer(BitBackend& be, std::span<const FixedPointCipher> features, const LayerSpec& spec,
                   const InferenceOptions& options = {});
/// Runs every layer; argmax is left to whoever holds the key.
EncScores classify(BitBackend& be, const EncImage& img, const NetworkSpec& net, const InferenceOptions& options = {});

/// Encodes real pixel values (flatten_index order) as private inputs.
EncImage encrypt_image(BitBackend& be, const Shape& shape, std::span<const double> values,
                       const FixedPointFormat& format, std::uint64_t seed);
std::vector<double> decrypt_scores(BitBackend& be, const EncScores& scores);

/// Double-precision forward pass over the same weights.
std::vector<double> reference_forward(const NetworkSpec& net, std::span<const double> image);

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> scores);

}  // namespace gcnn
