// SPDX-License-Identifier: Apache-2.0
//
// Text model format and plaintext image readers.
//
// Model files are whitespace-separated tokens; '#' starts a comment.
//
//   gcnn-model 1
//   format <total_bits> <frac_bits>
//   input <channels> <height> <width>
//   layer conv <in_channels> <out_channels> <kernel> <pool> <relu|linear>
//   weights <count>   followed by count reals, out x in x k x k row-major
//   biases <count>    followed by count reals
//   layer fc <inputs> <outputs> <relu|linear>
//   weights <count>   out x in row-major
//   biases <count>
//   end

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gcnn/cnn.hpp"

namespace gcnn {

/// Parses and shape-checks a model. A model with no layers is accepted here
/// (it is only useful for bound reports); classification requires more.
NetworkSpec parse_model(std::istream& in);
NetworkSpec load_model(const std::string& path);
void write_model(std::ostream& out, const NetworkSpec& net);
void save_model(const std::string& path, const NetworkSpec& net);

/// 8-bit grayscale PGM (P2 or P5). Pixels map to [-1, 1] via p / 127.5 - 1.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

GrayImage read_pgm(std::istream& in);
void write_pgm(std::ostream& out, const GrayImage& img);
double pixel_to_real(std::uint8_t pixel) noexcept;

/// Comma-separated reals, one image row per line (channels stacked
/// vertically). Values must lie in [-1, 1].
std::vector<std::vector<double>> read_csv(std::istream& in);

/// Loads a .pgm or .csv image, checks it against `expected` and returns the
/// values in flatten_index order.
std::vector<double> load_image(const std::string& path, const Shape& expected);

}  // namespace gcnn
