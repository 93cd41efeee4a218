// SPDX-License-Identifier: Apache-2.0
//
// Worst-case numerical error of the fixed-point CNN path.
//
// The layer-product bound is  Delta * prod_i (r_i * d_i)  with Delta = 2^-f,
// r_i = sqrt(s_i) and d_i the largest Euclidean norm of one output's weight
// vector. ReLU and max pooling contribute no factor. The product bound does
// not model weight/bias quantization, per-multiply rescaling floors or the
// channel fan-in beyond s_i, so the report carries a second term,
// `rescaling_slack`, such that  bound + slack  is a rigorous worst case.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcnn/cnn.hpp"

namespace gcnn {

struct LayerErrorFactors {
    std::size_t layer_index = 0;
    LayerKind kind = LayerKind::Convolution;
    std::size_t s = 0;       // window size: k*k for convolutions, input count for FC
    std::size_t fan_in = 0;  // terms per dot product (k*k*in for convolutions)
    double r_i = 0.0;        // sqrt(s)
    double d_i = 0.0;        // max Euclidean weight norm per output
    double d_i_abs_sum = 0.0;  // max sum of |weights| per output, for comparison
};

struct ErrorBoundReport {
    double initial_delta = 0.0;
    std::vector<LayerErrorFactors> factors;
    double r_product = 1.0;
    double d_product = 1.0;
    double total_bound = 0.0;
    double rescaling_slack = 0.0;

    std::optional<double> empirical_max_error;
    std::optional<double> empirical_mean;
    std::optional<double> empirical_std;
    std::size_t samples = 0;

    [[nodiscard]] double rigorous_bound() const noexcept { return total_bound + rescaling_slack; }
    /// Empirical maximum above the layer-product bound.
    [[nodiscard]] bool violates_bound() const noexcept {
        return empirical_max_error.has_value() && *empirical_max_error > total_bound;
    }
    [[nodiscard]] bool violates_rigorous_bound() const noexcept {
        return empirical_max_error.has_value() && *empirical_max_error > rigorous_bound();
    }

    [[nodiscard]] std::string to_text() const;
    /// One `key=value` per line.
    [[nodiscard]] std::string to_key_values() const;
};

LayerErrorFactors layer_factors(const LayerSpec& spec, std::size_t layer_index = 0);

/// Accepts networks with no layers (bound = Delta). Input values are assumed
/// to lie in [-1, 1].
ErrorBoundReport theorem_bound(const NetworkSpec& net);

struct ImageOutcome {
    std::vector<double> fixed_scores;
    std::vector<double> reference_scores;
    std::size_t fixed_class = 0;
    std::size_t reference_class = 0;
    double max_error = 0.0;
    [[nodiscard]] bool classes_match() const noexcept { return fixed_class == reference_class; }
};

struct EmpiricalRun {
    ErrorBoundReport report;
    std::vector<ImageOutcome> images;
    std::uint64_t overflows = 0;
    std::uint64_t nand_count = 0;

    [[nodiscard]] std::size_t matches() const noexcept;
};

/// Runs the fixed-point path on the clear backend and the double reference
/// on every image; fills the empirical fields of the report.
EmpiricalRun empirical_error(const NetworkSpec& net, std::span<const std::vector<double>> images,
                             std::size_t workers = 1);

}  // namespace gcnn
