// SPDX-License-Identifier: Apache-2.0
//
// gcnn: command-line front end over the C API.

#include <cinttypes>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcnn/gcnn.h"

namespace {

struct Config {
    std::string backend = "clear";
    std::string preset;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::string model;
    std::string key;
    std::string out;
    bool encrypt_weights = false;
    bool key_values = false;
    std::string input;
    std::vector<std::string> images;
};

struct Failure {
    gcnn_status status;
    std::string message;
};

[[noreturn]] void raise(gcnn_status status, std::string message) { throw Failure{status, std::move(message)}; }

void check(gcnn_status status) {
    if (status != GCNN_OK) raise(status, gcnn_last_error());
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const noexcept { Free(p); }
};
using KeyPtr = std::unique_ptr<gcnn_key, Deleter<gcnn_key, gcnn_key_free>>;
using ModelPtr = std::unique_ptr<gcnn_model, Deleter<gcnn_model, gcnn_model_free>>;
using BundlePtr = std::unique_ptr<gcnn_bundle, Deleter<gcnn_bundle, gcnn_bundle_free>>;
using ReportPtr = std::unique_ptr<gcnn_report, Deleter<gcnn_report, gcnn_report_free>>;

gcnn_backend parse_backend(const std::string& name) {
    if (name == "clear") return GCNN_BACKEND_CLEAR;
    if (name == "gsw") return GCNN_BACKEND_GSW;
    raise(GCNN_ERR_USAGE, "unknown backend '" + name + "' (expected clear or gsw)");
}

const char* backend_name(gcnn_backend b) { return b == GCNN_BACKEND_GSW ? "gsw" : "clear"; }

void need(const std::string& value, const char* flag, const char* command) {
    if (value.empty()) raise(GCNN_ERR_USAGE, std::string(command) + " needs " + flag);
}

ModelPtr load_model(const Config& cfg, const char* command) {
    need(cfg.model, "--model", command);
    gcnn_model* m = nullptr;
    check(gcnn_model_load(cfg.model.c_str(), &m));
    return ModelPtr(m);
}

KeyPtr load_key(const Config& cfg, const char* command) {
    need(cfg.key, "--key", command);
    gcnn_key* k = nullptr;
    check(gcnn_key_load(cfg.key.c_str(), &k));
    KeyPtr key(k);
    if (!cfg.preset.empty() && cfg.preset != gcnn_key_preset(key.get()))
        raise(GCNN_ERR_PARAM, "key was generated for preset '" + std::string(gcnn_key_preset(key.get())) +
                                  "', not '" + cfg.preset + "'");
    return key;
}

BundlePtr load_bundle(const std::string& path) {
    gcnn_bundle* b = nullptr;
    check(gcnn_bundle_load(path.c_str(), &b));
    return BundlePtr(b);
}

// The bundle decides the backend; an explicit --backend must agree with it.
KeyPtr key_for_bundle(const Config& cfg, const gcnn_bundle* bundle, bool backend_given, const char* command) {
    const gcnn_backend actual = gcnn_bundle_backend(bundle);
    if (backend_given && parse_backend(cfg.backend) != actual)
        raise(GCNN_ERR_USAGE, std::string("input was produced by the ") + backend_name(actual) +
                                  " backend, not " + cfg.backend);
    if (actual == GCNN_BACKEND_GSW) return load_key(cfg, command);
    return KeyPtr();
}

void emit(const Config& cfg, const std::string& text) {
    if (cfg.out.empty()) {
        std::fputs(text.c_str(), stdout);
        return;
    }
    check(gcnn_save_text(cfg.out.c_str(), text.c_str()));
}

int cmd_keygen(const Config& cfg) {
    need(cfg.out, "--out", "keygen");
    const std::string preset = cfg.preset.empty() ? "toy" : cfg.preset;
    gcnn_key* k = nullptr;
    check(gcnn_keygen(preset.c_str(), cfg.seed, &k));
    KeyPtr key(k);
    check(gcnn_key_save(key.get(), cfg.out.c_str()));
    std::printf("wrote %s key (ciphertext dimension %zu) to %s\n", gcnn_key_preset(key.get()),
                gcnn_key_ct_dim(key.get()), cfg.out.c_str());
    return 0;
}

int cmd_encrypt(const Config& cfg) {
    need(cfg.out, "--out", "encrypt-image");
    ModelPtr model = load_model(cfg, "encrypt-image");
    const gcnn_backend backend = parse_backend(cfg.backend);
    KeyPtr key = backend == GCNN_BACKEND_GSW ? load_key(cfg, "encrypt-image") : KeyPtr();
    gcnn_bundle* b = nullptr;
    check(gcnn_encrypt_image(model.get(), backend, key.get(), cfg.input.c_str(), cfg.seed, &b));
    BundlePtr bundle(b);
    check(gcnn_bundle_save(bundle.get(), cfg.out.c_str()));
    unsigned w = 0;
    unsigned f = 0;
    gcnn_model_format(model.get(), &w, &f);
    std::printf("encrypted %zu values (%zu bit records, %s backend) to %s\n", gcnn_bundle_value_count(bundle.get()),
                gcnn_bundle_value_count(bundle.get()) * w, backend_name(backend), cfg.out.c_str());
    return 0;
}

int cmd_classify(const Config& cfg, bool backend_given) {
    need(cfg.out, "--out", "classify");
    ModelPtr model = load_model(cfg, "classify");
    BundlePtr image = load_bundle(cfg.input);
    KeyPtr key = key_for_bundle(cfg, image.get(), backend_given, "classify");
    gcnn_classify_options opts{cfg.workers, cfg.encrypt_weights ? 1 : 0, cfg.seed};
    gcnn_gate_stats stats{};
    gcnn_bundle* s = nullptr;
    check(gcnn_classify(model.get(), image.get(), key.get(), &opts, &s, &stats));
    BundlePtr scores(s);
    check(gcnn_bundle_save(scores.get(), cfg.out.c_str()));
    std::printf("scores        %zu -> %s\n", gcnn_bundle_value_count(scores.get()), cfg.out.c_str());
    std::printf("nand gates    %" PRIu64 "\n", stats.nand_count);
    std::printf("constants     %" PRIu64 "\n", stats.constant_count);
    std::printf("refreshes     %" PRIu64 "\n", stats.refresh_count);
    if (gcnn_bundle_backend(image.get()) == GCNN_BACKEND_GSW) std::printf("max noise     %.6g\n", stats.max_noise);
    else std::printf("overflows     %" PRIu64 "\n", stats.overflow_count);
    std::printf("wall time     %.3f s\n", stats.seconds);
    return 0;
}

int cmd_decrypt(const Config& cfg, bool backend_given) {
    BundlePtr scores = load_bundle(cfg.input);
    KeyPtr key = key_for_bundle(cfg, scores.get(), backend_given, "decrypt-scores");
    std::vector<double> values(gcnn_bundle_value_count(scores.get()));
    std::size_t count = 0;
    std::size_t label = 0;
    check(gcnn_decrypt_scores(scores.get(), key.get(), values.data(), values.size(), &count, &label));
    std::string text;
    char line[64];
    for (std::size_t i = 0; i < count; ++i) {
        std::snprintf(line, sizeof line, "score %zu %.17g\n", i, values[i]);
        text += line;
    }
    std::snprintf(line, sizeof line, "class %zu\n", label);
    text += line;
    emit(cfg, text);
    return 0;
}

int cmd_bound(const Config& cfg) {
    ModelPtr model = load_model(cfg, "bound");
    gcnn_report* r = nullptr;
    check(gcnn_bound(model.get(), &r));
    ReportPtr report(r);
    emit(cfg, gcnn_report_text(report.get(), cfg.key_values ? 1 : 0));
    return 0;
}

int cmd_verify(const Config& cfg) {
    ModelPtr model = load_model(cfg, "verify");
    std::vector<const char*> paths;
    for (const auto& p : cfg.images) paths.push_back(p.c_str());
    gcnn_report* r = nullptr;
    const gcnn_status status = gcnn_verify(model.get(), paths.data(), paths.size(), cfg.workers, &r);
    if (r == nullptr) check(status);
    ReportPtr report(r);
    const std::string message = gcnn_last_error();
    emit(cfg, gcnn_report_text(report.get(), cfg.key_values ? 1 : 0));
    if (status != GCNN_OK) raise(status, message);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Encrypted CNN inference over NAND-only homomorphic encryption"};
    app.require_subcommand(1);
    app.fallthrough();
    Config cfg;

    auto* backend_opt = app.add_option("--backend", cfg.backend, "Bit backend: clear or gsw")
                            ->check(CLI::IsMember({"clear", "gsw"}));
    app.add_option("--preset", cfg.preset, "Encryption parameters: toy or demo")
        ->check(CLI::IsMember({"toy", "demo"}));
    app.add_option("--seed", cfg.seed, "Seed for every random choice");
    app.add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--model", cfg.model, "Model file");
    app.add_option("--key", cfg.key, "Secret key file");
    app.add_option("--out", cfg.out, "Output file");

    auto* keygen = app.add_subcommand("keygen", "Generate a secret key");
    auto* encrypt = app.add_subcommand("encrypt-image", "Encrypt a .pgm or .csv image");
    encrypt->add_option("image", cfg.input, "Image file")->required();
    auto* classify = app.add_subcommand("classify", "Run the network on an encrypted image");
    classify->add_option("input", cfg.input, "Encrypted image")->required();
    classify->add_flag("--encrypt-weights", cfg.encrypt_weights, "Feed the model parameters as private inputs");
    auto* decrypt = app.add_subcommand("decrypt-scores", "Decrypt scores and print the class");
    decrypt->add_option("input", cfg.input, "Encrypted scores")->required();
    auto* bound = app.add_subcommand("bound", "Report the worst-case numerical error of a model");
    bound->add_flag("--key-values", cfg.key_values, "Print key=value lines");
    auto* verify = app.add_subcommand("verify", "Compare the fixed-point path against the double reference");
    verify->add_option("images", cfg.images, "Image files")->required();
    verify->add_flag("--key-values", cfg.key_values, "Print key=value lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return GCNN_ERR_USAGE;
    }

    const bool backend_given = backend_opt->count() > 0;
    try {
        if (*keygen) return cmd_keygen(cfg);
        if (*encrypt) return cmd_encrypt(cfg);
        if (*classify) return cmd_classify(cfg, backend_given);
        if (*decrypt) return cmd_decrypt(cfg, backend_given);
        if (*bound) return cmd_bound(cfg);
        if (*verify) return cmd_verify(cfg);
    } catch (const Failure& f) {
        std::fprintf(stderr, "gcnn: %s: %s\n", gcnn_status_name(f.status), f.message.c_str());
        return static_cast<int>(f.status);
    }
    return GCNN_ERR_USAGE;
}
