// SPDX-License-Identifier: Apache-2.0

#include "gcnn/error_analysis.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "gcnn/error.hpp"

namespace gcnn {

LayerErrorFactors layer_factors(const LayerSpec& spec, std::size_t layer_index) {
    LayerErrorFactors f;
    f.layer_index = layer_index;
    f.kind = spec.kind;
    if (spec.kind == LayerKind::Convolution) {
        f.s = spec.kernel_size * spec.kernel_size;
        f.fan_in = f.s * spec.in_channels;
    } else {
        f.s = spec.in_channels;
        f.fan_in = spec.in_channels;
    }
    f.r_i = std::sqrt(static_cast<double>(f.s));
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
        const auto w = spec.weights_of(o);
        double sq = 0.0;
        double abs_sum = 0.0;
        for (double c : w) {
            sq += c * c;
            abs_sum += std::abs(c);
        }
        f.d_i = std::max(f.d_i, std::sqrt(sq));
        f.d_i_abs_sum = std::max(f.d_i_abs_sum, abs_sum);
    }
    return f;
}

ErrorBoundReport theorem_bound(const NetworkSpec& net) {
    net.format.validate();
    (void)net.shapes();
    const double delta = net.format.resolution();

    ErrorBoundReport report;
    report.initial_delta = delta;

    double product = delta;  // layer-product bound after each layer
    double slack = 0.0;      // rigorous excess over `product`
    double magnitude = 1.0;  // bound on |activation| entering each layer
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        const LayerErrorFactors f = layer_factors(l, i);
        report.factors.push_back(f);
        report.r_product *= f.r_i;
        report.d_product *= f.d_i;

        // Per output: |err_out| <= E * (|c|_1 + m*Delta) + m*Delta*(X + 1) + Delta,
        // from weight flooring, product flooring and bias flooring.
        const auto m = static_cast<double>(f.fan_in);
        const double growth = f.d_i_abs_sum + m * delta;
        const double local = m * delta * (magnitude + 1.0) + delta;
        const double layer_factor = f.r_i * f.d_i;
        slack = slack * growth + product * std::max(0.0, growth - layer_factor) + local;
        product *= layer_factor;

        double next_magnitude = 0.0;
        for (std::size_t o = 0; o < l.out_channels; ++o) {
            double abs_sum = 0.0;
            for (double c : l.weights_of(o)) abs_sum += std::abs(c);
            next_magnitude = std::max(next_magnitude, abs_sum * magnitude + std::abs(l.biases[o]));
        }
        magnitude = next_magnitude;
    }
    report.total_bound = delta * report.r_product * report.d_product;
    report.rescaling_slack = slack;
    return report;
}

std::size_t EmpiricalRun::matches() const noexcept {
    std::size_t n = 0;
    for (const auto& img : images) n += img.classes_match() ? 1 : 0;
    return n;
}

EmpiricalRun empirical_error(const NetworkSpec& net, std::span<const std::vector<double>> images,
                             std::size_t workers) {
    net.validate();
    EmpiricalRun run;
    run.report = theorem_bound(net);
    ClearBackend be;
    InferenceOptions options;
    options.workers = workers;

    double sum = 0.0;
    double sum_sq = 0.0;
    double worst = 0.0;
    std::size_t count = 0;
    for (const auto& pixels : images) {
        const EncImage img = encrypt_image(be, net.input, pixels, net.format, 0);
        ImageOutcome outcome;
        outcome.fixed_scores = decrypt_scores(be, classify(be, img, net, options));
        outcome.reference_scores = reference_forward(net, pixels);
        outcome.fixed_class = argmax(outcome.fixed_scores);
        outcome.reference_class = argmax(outcome.reference_scores);
        for (std::size_t k = 0; k < outcome.fixed_scores.size(); ++k) {
            const double err = std::abs(outcome.fixed_scores[k] - outcome.reference_scores[k]);
            outcome.max_error = std::max(outcome.max_error, err);
            sum += err;
            sum_sq += err * err;
            ++count;
        }
        worst = std::max(worst, outcome.max_error);
        run.images.push_back(std::move(outcome));
    }
    if (count > 0) {
        const double mean = sum / static_cast<double>(count);
        run.report.empirical_mean = mean;
        run.report.empirical_std = std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) - mean * mean));
        run.report.empirical_max_error = worst;
    }
    run.report.samples = count;
    run.overflows = be.overflow_count();
    run.nand_count = be.stats().nand_count();
    return run;
}

std::string ErrorBoundReport::to_text() const {
    std::ostringstream out;
    out << std::setprecision(6);
    out << "initial error (Delta)      " << initial_delta << "\n";
    out << "layer  kind  s      fan_in  r_i          d_i          d_i(sum|c|)\n";
    for (const auto& f : factors) {
        out << std::left << std::setw(7) << f.layer_index << std::setw(6) << to_string(f.kind) << std::setw(7)
            << f.s << std::setw(8) << f.fan_in << std::setw(13) << f.r_i << std::setw(13) << f.d_i << f.d_i_abs_sum
            << "\n"
            << std::right;
    }
    out << std::setprecision(12);
    out << "r product                  " << r_product << "\n";
    out << "d product                  " << d_product << "\n";
    out << "total bound                " << total_bound << "\n";
    out << "rescaling slack            " << rescaling_slack << "\n";
    out << "bound + slack              " << rigorous_bound() << "\n";
    if (empirical_max_error) {
        out << std::setprecision(6);
        out << "empirical samples          " << samples << "\n";
        out << "empirical mean error       " << empirical_mean.value_or(0.0) << "\n";
        out << "empirical std error        " << empirical_std.value_or(0.0) << "\n";
        out << "empirical max error        " << *empirical_max_error << "\n";
        out << "bound violated             " << (violates_bound() ? "yes" : "no") << "\n";
    }
    return out.str();
}

std::string ErrorBoundReport::to_key_values() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "initial_delta=" << initial_delta << "\n";
    out << "layers=" << factors.size() << "\n";
    for (const auto& f : factors) {
        const std::string p = "layer" + std::to_string(f.layer_index) + ".";
        out << p << "kind=" << to_string(f.kind) << "\n";
        out << p << "s=" << f.s << "\n";
        out << p << "fan_in=" << f.fan_in << "\n";
        out << p << "r=" << f.r_i << "\n";
        out << p << "d=" << f.d_i << "\n";
        out << p << "d_abs_sum=" << f.d_i_abs_sum << "\n";
    }
    out << "r_product=" << r_product << "\n";
    out << "d_product=" << d_product << "\n";
    out << "total_bound=" << total_bound << "\n";
    out << "rescaling_slack=" << rescaling_slack << "\n";
    if (empirical_max_error) {
        out << "samples=" << samples << "\n";
        out << "empirical_mean=" << empirical_mean.value_or(0.0) << "\n";
        out << "empirical_std=" << empirical_std.value_or(0.0) << "\n";
        out << "empirical_max=" << *empirical_max_error << "\n";
        out << "bound_violated=" << (violates_bound() ? 1 : 0) << "\n";
    }
    return out.str();
}

}  // namespace gcnn
