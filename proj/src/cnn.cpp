// SPDX-License-Identifier: Apache-2.0

#include "gcnn/cnn.hpp"

#include <algorithm>
#include <cmath>

#include "gcnn/error.hpp"
#include "gcnn/rng.hpp"
#include "parallel.hpp"

namespace gcnn {

std::string_view to_string(LayerKind kind) noexcept {
    return kind == LayerKind::Convolution ? "conv" : "fc";
}

std::string_view to_string(Activation act) noexcept { return act == Activation::Relu ? "relu" : "linear"; }

std::string to_string(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

LayerSpec LayerSpec::convolution(std::size_t in, std::size_t out, std::size_t kernel, std::size_t pool,
                                 Activation act) {
    LayerSpec l;
    l.kind = LayerKind::Convolution;
    l.in_channels = in;
    l.out_channels = out;
    l.kernel_size = kernel;
    l.pool_size = pool;
    l.activation = act;
    l.weights.assign(l.weight_count(), 0.0);
    l.biases.assign(out, 0.0);
    return l;
}

LayerSpec LayerSpec::fully_connected(std::size_t in, std::size_t out, Activation act) {
    LayerSpec l;
    l.kind = LayerKind::FullyConnected;
    l.in_channels = in;
    l.out_channels = out;
    l.kernel_size = 0;
    l.pool_size = 1;
    l.activation = act;
    l.weights.assign(l.weight_count(), 0.0);
    l.biases.assign(out, 0.0);
    return l;
}

std::size_t LayerSpec::weight_count() const noexcept {
    return kind == LayerKind::Convolution ? out_channels * in_channels * kernel_size * kernel_size
                                          : out_channels * in_channels;
}

std::span<const double> LayerSpec::weights_of(std::size_t out) const {
    const std::size_t per = weight_count() / std::max<std::size_t>(out_channels, 1);
    return std::span<const double>(weights).subspan(out * per, per);
}

Shape LayerSpec::output_shape(const Shape& in) const {
    if (out_channels == 0 || in_channels == 0) fail(ErrorKind::Shape, "layer with zero inputs or outputs");
    if (kind == LayerKind::FullyConnected) {
        if (in.size() != in_channels)
            fail(ErrorKind::Shape, "fully connected layer expects " + std::to_string(in_channels) + " inputs, got " +
                                       std::to_string(in.size()) + " (" + to_string(in) + ")");
        return {out_channels, 1, 1};
    }
    if (in.channels != in_channels)
        fail(ErrorKind::Shape, "convolution expects " + std::to_string(in_channels) + " input channels, got " +
                                   std::to_string(in.channels));
    if (kernel_size == 0 || pool_size == 0) fail(ErrorKind::Shape, "kernel and pool sizes must be positive");
    if (in.height < kernel_size || in.width < kernel_size)
        fail(ErrorKind::Shape, "input " + to_string(in) + " is smaller than the " + std::to_string(kernel_size) +
                                   "x" + std::to_string(kernel_size) + " kernel");
    const std::size_t conv_h = in.height - kernel_size + 1;
    const std::size_t conv_w = in.width - kernel_size + 1;
    if (conv_h % pool_size != 0 || conv_w % pool_size != 0)
        fail(ErrorKind::Shape, "convolution output " + std::to_string(conv_h) + "x" + std::to_string(conv_w) +
                                   " is not divisible by pool size " + std::to_string(pool_size));
    return {out_channels, conv_h / pool_size, conv_w / pool_size};
}

std::vector<Shape> NetworkSpec::shapes() const {
    std::vector<Shape> out{input};
    bool flattened = false;
    for (const auto& layer : layers) {
        if (layer.kind == LayerKind::Convolution && flattened)
            fail(ErrorKind::Shape, "convolution layer after a fully connected layer");
        flattened = flattened || layer.kind == LayerKind::FullyConnected;
        out.push_back(layer.output_shape(out.back()));
    }
    return out;
}

void NetworkSpec::validate() const {
    format.validate();
    if (input.size() == 0) fail(ErrorKind::Shape, "network input shape is empty");
    if (layers.empty()) fail(ErrorKind::Shape, "network has no layers");
    if (layers.back().kind != LayerKind::FullyConnected)
        fail(ErrorKind::Shape, "the final layer must be fully connected");
    (void)shapes();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weights.size() != l.weight_count() || l.biases.size() != l.out_channels)
            fail(ErrorKind::Shape, "layer " + std::to_string(i) + " has " + std::to_string(l.weights.size()) +
                                       " weights and " + std::to_string(l.biases.size()) + " biases, expected " +
                                       std::to_string(l.weight_count()) + " and " + std::to_string(l.out_channels));
        for (double w : l.weights) (void)format.quantize(w);
        for (double b : l.biases) (void)format.quantize(b);
    }
}

std::size_t NetworkSpec::class_count() const { return layers.empty() ? 0 : layers.back().out_channels; }

NetworkSpec preset_architecture(FixedPointFormat format) {
    NetworkSpec net;
    net.input = {1, 28, 28};
    net.format = format;
    net.layers.push_back(LayerSpec::convolution(1, 4, 5, 2));
    net.layers.push_back(LayerSpec::convolution(4, 15, 5, 2));
    net.layers.push_back(LayerSpec::fully_connected(240, 10));
    return net;
}

FixedPointCipher dot_product(BitBackend& be, std::span<const FixedPointCipher> inputs, std::span<const double> weights,
                             double bias) {
    if (inputs.size() != weights.size())
        fail(ErrorKind::Shape, "dot_product: " + std::to_string(inputs.size()) + " inputs but " +
                                   std::to_string(weights.size()) + " weights");
    if (inputs.empty()) fail(ErrorKind::Shape, "dot_product of empty vectors");
    const FixedPointFormat& fmt = inputs.front().format;
    FixedPointCipher acc = fp_mul_const(be, inputs[0], weights[0]);
    for (std::size_t i = 1; i < inputs.size(); ++i) acc = fp_add(be, acc, fp_mul_const(be, inputs[i], weights[i]));
    return fp_add(be, acc, encode_public(be, bias, fmt));
}

FixedPointCipher dot_product(BitBackend& be, std::span<const FixedPointCipher> inputs,
                             std::span<const FixedPointCipher> weights, const FixedPointCipher& bias) {
    if (inputs.size() != weights.size())
        fail(ErrorKind::Shape, "dot_product: " + std::to_string(inputs.size()) + " inputs but " +
                                   std::to_string(weights.size()) + " weights");
    if (inputs.empty()) fail(ErrorKind::Shape, "dot_product of empty vectors");
    FixedPointCipher acc = fp_mul(be, inputs[0], weights[0]);
    for (std::size_t i = 1; i < inputs.size(); ++i) acc = fp_add(be, acc, fp_mul(be, inputs[i], weights[i]));
    return fp_add(be, acc, bias);
}

namespace {

struct EncodedLayer {
    std::vector<FixedPointCipher> weights;
    std::vector<FixedPointCipher> biases;
};

EncodedLayer encode_layer(BitBackend& be, const LayerSpec& spec, const FixedPointFormat& fmt,
                          const InferenceOptions& options) {
    EncodedLayer out;
    out.weights.reserve(spec.weights.size());
    out.biases.reserve(spec.biases.size());
    auto put = [&](std::vector<FixedPointCipher>& dst, double value, std::uint64_t index) {
        if (options.encrypt_weights)
            dst.push_back(encode(be, value, fmt, mix64(options.weight_seed ^ mix64(index))));
        else
            dst.push_back(encode_public(be, value, fmt));
    };
    for (std::size_t i = 0; i < spec.weights.size(); ++i) put(out.weights, spec.weights[i], 2 * i);
    for (std::size_t i = 0; i < spec.biases.size(); ++i) put(out.biases, spec.biases[i], 2 * i + 1);
    return out;
}

FixedPointCipher activate(BitBackend& be, const FixedPointCipher& x, Activation act) {
    return act == Activation::Relu ? fp_relu(be, x) : x;
}

const FixedPointFormat& image_format(const EncImage& img) {
    if (img.values.empty()) fail(ErrorKind::Shape, "empty encrypted image");
    return img.values.front().format;
}

}  // namespace

EncImage conv_layer(BitBackend& be, const EncImage& img, const LayerSpec& spec, const InferenceOptions& options) {
    if (spec.kind != LayerKind::Convolution) fail(ErrorKind::Usage, "conv_layer needs a convolution LayerSpec");
    if (img.values.size() != img.shape.size()) fail(ErrorKind::Shape, "encrypted image value count mismatch");
    const Shape out_shape = spec.output_shape(img.shape);
    if (spec.weights.size() != spec.weight_count() || spec.biases.size() != spec.out_channels)
        fail(ErrorKind::Shape, "convolution weight/bias count does not match its dimensions");
    const FixedPointFormat& fmt = image_format(img);
    const EncodedLayer enc = encode_layer(be, spec, fmt, options);

    const std::size_t k = spec.kernel_size;
    const std::size_t pool = spec.pool_size;
    const std::size_t per_out = spec.in_channels * k * k;

    EncImage out{out_shape, std::vector<FixedPointCipher>(out_shape.size())};
    detail::parallel_for(out_shape.size(), options.workers, [&](std::size_t task) {
        const std::size_t o = task / (out_shape.height * out_shape.width);
        const std::size_t pr = (task / out_shape.width) % out_shape.height;
        const std::size_t pc = task % out_shape.width;
        const std::span<const FixedPointCipher> kernel(enc.weights.data() + o * per_out, per_out);

        std::vector<FixedPointCipher> window;
        window.reserve(pool * pool);
        std::vector<FixedPointCipher> patch;
        patch.reserve(per_out);
        for (std::size_t dr = 0; dr < pool; ++dr) {
            for (std::size_t dc = 0; dc < pool; ++dc) {
                const std::size_t row = pr * pool + dr;
                const std::size_t col = pc * pool + dc;
                patch.clear();
                for (std::size_t ci = 0; ci < spec.in_channels; ++ci)
                    for (std::size_t kr = 0; kr < k; ++kr)
                        for (std::size_t kc = 0; kc < k; ++kc) patch.push_back(img.at(ci, row + kr, col + kc));
                window.push_back(activate(be, dot_product(be, patch, kernel, enc.biases[o]), spec.activation));
            }
        }
        out.values[task] = pool == 1 ? std::move(window.front()) : fp_max(be, window);
    });
    return out;
}

EncScores fc_layer(BitBackend& be, std::span<const FixedPointCipher> features, const LayerSpec& spec,
                   const InferenceOptions& options) {
    if (spec.kind != LayerKind::FullyConnected) fail(ErrorKind::Usage, "fc_layer needs a fully connected LayerSpec");
    if (features.size() != spec.in_channels)
        fail(ErrorKind::Shape, "fully connected layer expects " + std::to_string(spec.in_channels) +
                                   " features, got " + std::to_string(features.size()));
    if (spec.weights.size() != spec.weight_count() || spec.biases.size() != spec.out_channels)
        fail(ErrorKind::Shape, "fully connected weight/bias count does not match its dimensions");
    if (features.empty()) fail(ErrorKind::Shape, "no features");
    const EncodedLayer enc = encode_layer(be, spec, features.front().format, options);

    EncScores out{std::vector<FixedPointCipher>(spec.out_channels)};
    detail::parallel_for(spec.out_channels, options.workers, [&](std::size_t o) {
        const std::span<const FixedPointCipher> row(enc.weights.data() + o * spec.in_channels, spec.in_channels);
        out.scores[o] = activate(be, dot_product(be, features, row, enc.biases[o]), spec.activation);
    });
    return out;
}

EncScores classify(BitBackend& be, const EncImage& img, const NetworkSpec& net, const InferenceOptions& options) {
    net.validate();
    if (!(img.shape == net.input))
        fail(ErrorKind::Shape, "image shape " + to_string(img.shape) + " does not match the model input " +
                                   to_string(net.input));
    if (!(image_format(img) == net.format)) fail(ErrorKind::Shape, "image fixed-point format differs from the model's");

    EncImage current = img;
    std::vector<FixedPointCipher> features;
    bool flat = false;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& layer = net.layers[i];
        InferenceOptions layer_options = options;
        layer_options.weight_seed = mix64(options.weight_seed + i + 1);
        if (layer.kind == LayerKind::Convolution) {
            current = conv_layer(be, current, layer, layer_options);
        } else {
            // Values are already stored channel-major, row, column.
            if (!flat) features = std::move(current.values);
            flat = true;
            features = std::move(fc_layer(be, features, layer, layer_options).scores);
        }
    }
    return EncScores{std::move(features)};
}

EncImage encrypt_image(BitBackend& be, const Shape& shape, std::span<const double> values,
                       const FixedPointFormat& format, std::uint64_t seed) {
    if (values.size() != shape.size())
        fail(ErrorKind::Shape, "image has " + std::to_string(values.size()) + " values, expected " +
                                   std::to_string(shape.size()) + " (" + to_string(shape) + ")");
    EncImage img{shape, {}};
    img.values.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        img.values.push_back(encode(be, values[i], format, mix64(seed ^ mix64(i + 0x100000000ULL))));
    return img;
}

std::vector<double> decrypt_scores(BitBackend& be, const EncScores& scores) {
    std::vector<double> out;
    out.reserve(scores.scores.size());
    for (const auto& s : scores.scores) out.push_back(decode(be, s));
    return out;
}

std::vector<double> reference_forward(const NetworkSpec& net, std::span<const double> image) {
    const auto shapes = net.shapes();
    if (image.size() != net.input.size())
        fail(ErrorKind::Shape, "reference input has " + std::to_string(image.size()) + " values, expected " +
                                   std::to_string(net.input.size()));
    std::vector<double> cur(image.begin(), image.end());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerSpec& l = net.layers[li];
        const Shape& in = shapes[li];
        const Shape& out = shapes[li + 1];
        std::vector<double> next(out.size());
        auto act = [&](double v) { return l.activation == Activation::Relu ? std::max(v, 0.0) : v; };
        if (l.kind == LayerKind::FullyConnected) {
            for (std::size_t o = 0; o < l.out_channels; ++o) {
                const auto w = l.weights_of(o);
                double acc = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * cur[i];
                next[o] = act(acc + l.biases[o]);
            }
        } else {
            const std::size_t k = l.kernel_size;
            const std::size_t p = l.pool_size;
            for (std::size_t o = 0; o < l.out_channels; ++o) {
                const auto w = l.weights_of(o);
                for (std::size_t pr = 0; pr < out.height; ++pr) {
                    for (std::size_t pc = 0; pc < out.width; ++pc) {
                        double best = 0.0;
                        for (std::size_t dr = 0; dr < p; ++dr) {
                            for (std::size_t dc = 0; dc < p; ++dc) {
                                const std::size_t row = pr * p + dr;
                                const std::size_t col = pc * p + dc;
                                double acc = 0.0;
                                std::size_t wi = 0;
                                for (std::size_t ci = 0; ci < l.in_channels; ++ci)
                                    for (std::size_t kr = 0; kr < k; ++kr)
                                        for (std::size_t kc = 0; kc < k; ++kc)
                                            acc += w[wi++] *
                                                   cur[flatten_index(ci, row + kr, col + kc, in.height, in.width)];
                                const double v = act(acc + l.biases[o]);
                                best = (dr == 0 && dc == 0) ? v : std::max(best, v);
                            }
                        }
                        next[flatten_index(o, pr, pc, out.height, out.width)] = best;
                    }
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

std::size_t argmax(std::span<const double> scores) {
    if (scores.empty()) fail(ErrorKind::Usage, "argmax of an empty score list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

}  // namespace gcnn
