// SPDX-License-Identifier: Apache-2.0

#include "gcnn/gcnn.h"

#include <chrono>
#include <cstring>
#include <iomanip>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "gcnn/backend.hpp"
#include "gcnn/cnn.hpp"
#include "gcnn/error.hpp"
#include "gcnn/error_analysis.hpp"
#include "gcnn/fhe_core.hpp"
#include "gcnn/model_io.hpp"
#include "gcnn/serialization.hpp"

struct gcnn_key {
    std::shared_ptr<const gcnn::SecretKey> key;
};

struct gcnn_model {
    gcnn::NetworkSpec net;
};

struct gcnn_bundle {
    gcnn::CipherBundle bundle;
};

struct gcnn_report {
    gcnn::ErrorBoundReport report;
    std::string text;
    std::string key_values;
    std::size_t images = 0;
    std::size_t matches = 0;
};

namespace {

thread_local std::string g_last_error;

gcnn_status status_of(gcnn::ErrorKind kind) noexcept {
    switch (kind) {
        case gcnn::ErrorKind::Usage: return GCNN_ERR_USAGE;
        case gcnn::ErrorKind::Parameter: return GCNN_ERR_PARAM;
        case gcnn::ErrorKind::Range: return GCNN_ERR_RANGE;
        case gcnn::ErrorKind::Shape: return GCNN_ERR_SHAPE;
        case gcnn::ErrorKind::Format: return GCNN_ERR_FORMAT;
        case gcnn::ErrorKind::Io: return GCNN_ERR_IO;
        case gcnn::ErrorKind::NoiseExhausted: return GCNN_ERR_NOISE;
    }
    return GCNN_ERR_INTERNAL;
}

template <typename F>
gcnn_status guarded(F&& body) noexcept {
    try {
        g_last_error.clear();
        return body();
    } catch (const gcnn::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return GCNN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GCNN_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return GCNN_ERR_INTERNAL;
    }
}

template <typename T>
void require(const T* p, const char* what) {
    if (p == nullptr) gcnn::fail(gcnn::ErrorKind::Usage, std::string(what) + " is required");
}

const gcnn::SecretKey& key_for(const gcnn::CipherBundle& b, const gcnn_key* key) {
    if (key == nullptr) gcnn::fail(gcnn::ErrorKind::Usage, "the gsw backend needs a key");
    if (!b.params || !(*b.params == key->key->params))
        gcnn::fail(gcnn::ErrorKind::NoiseExhausted, "key parameters do not match the ciphertexts");
    return *key->key;
}

gcnn::CipherBundle encrypt_into(const gcnn::NetworkSpec& net, gcnn_backend backend, const gcnn_key* key,
                                const std::vector<double>& values, std::uint64_t seed) {
    gcnn::CipherBundle b;
    b.payload = gcnn::PayloadKind::Image;
    b.format = net.format;
    b.shape = net.input;
    gcnn::EncImage img;
    if (backend == GCNN_BACKEND_GSW) {
        if (key == nullptr) gcnn::fail(gcnn::ErrorKind::Usage, "the gsw backend needs a key");
        gcnn::GswBackend be(key->key, seed);
        img = gcnn::encrypt_image(be, net.input, values, net.format, seed);
        b.backend = gcnn::BackendKind::Gsw;
        b.params = key->key->params;
    } else if (backend == GCNN_BACKEND_CLEAR) {
        gcnn::ClearBackend be;
        img = gcnn::encrypt_image(be, net.input, values, net.format, seed);
        b.backend = gcnn::BackendKind::Clear;
    } else {
        gcnn::fail(gcnn::ErrorKind::Usage, "unknown backend");
    }
    b.values = std::move(img.values);
    return b;
}

// Decrypts one bit and checks that the measured error is within the tracked
// estimate; a wrong key leaves an error near q/2.
bool decrypt_verified(const gcnn::SecretKey& sk, const gcnn::EncBit& bit) {
    const auto& ct = bit.ciphertext();
    if (!ct) gcnn::fail(gcnn::ErrorKind::Format, "bundle holds a non-gsw bit");
    const bool value = gcnn::decrypt_bit(sk, *ct);
    if (!ct->is_trivial() && static_cast<double>(gcnn::measure_noise(sk, *ct, value)) > ct->noise_estimate())
        gcnn::fail(gcnn::ErrorKind::NoiseExhausted, "decryption failed: the key does not match the ciphertexts");
    return value;
}

}  // namespace

extern "C" {

const char* gcnn_last_error(void) { return g_last_error.c_str(); }

const char* gcnn_status_name(gcnn_status status) {
    switch (status) {
        case GCNN_OK: return "ok";
        case GCNN_ERR_USAGE: return "usage error";
        case GCNN_ERR_IO: return "i/o error";
        case GCNN_ERR_SHAPE: return "shape error";
        case GCNN_ERR_NOISE: return "noise or decryption error";
        case GCNN_ERR_VERIFY: return "verification failed";
        case GCNN_ERR_PARAM: return "parameter error";
        case GCNN_ERR_RANGE: return "range error";
        case GCNN_ERR_FORMAT: return "format error";
        case GCNN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* gcnn_version(void) { return "1.0.0"; }

gcnn_status gcnn_keygen(const char* preset, uint64_t seed, gcnn_key** out) {
    return guarded([&] {
        require(preset, "preset");
        require(out, "output handle");
        const gcnn::FheParams params = gcnn::FheParams::from_name(preset);
        auto h = std::make_unique<gcnn_key>();
        h->key = std::make_shared<const gcnn::SecretKey>(gcnn::keygen(params, seed));
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_key_load(const char* path, gcnn_key** out) {
    return guarded([&] {
        require(path, "key path");
        require(out, "output handle");
        auto h = std::make_unique<gcnn_key>();
        h->key = std::make_shared<const gcnn::SecretKey>(gcnn::load_secret_key(path));
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_key_save(const gcnn_key* key, const char* path) {
    return guarded([&] {
        require(key, "key");
        require(path, "output path");
        gcnn::save_secret_key(path, *key->key);
        return GCNN_OK;
    });
}

const char* gcnn_key_preset(const gcnn_key* key) {
    if (key == nullptr) return "";
    return gcnn::preset_name(key->key->params.preset).data();
}

size_t gcnn_key_ct_dim(const gcnn_key* key) { return key == nullptr ? 0 : key->key->params.ct_dim; }

void gcnn_key_free(gcnn_key* key) { delete key; }

gcnn_status gcnn_model_load(const char* path, gcnn_model** out) {
    return guarded([&] {
        require(path, "model path");
        require(out, "output handle");
        auto h = std::make_unique<gcnn_model>();
        h->net = gcnn::load_model(path);
        *out = h.release();
        return GCNN_OK;
    });
}

void gcnn_model_input_shape(const gcnn_model* model, size_t* channels, size_t* height, size_t* width) {
    const gcnn::Shape s = model == nullptr ? gcnn::Shape{} : model->net.input;
    if (channels != nullptr) *channels = s.channels;
    if (height != nullptr) *height = s.height;
    if (width != nullptr) *width = s.width;
}

void gcnn_model_format(const gcnn_model* model, unsigned* total_bits, unsigned* frac_bits) {
    const gcnn::FixedPointFormat f = model == nullptr ? gcnn::FixedPointFormat{} : model->net.format;
    if (total_bits != nullptr) *total_bits = f.total_bits;
    if (frac_bits != nullptr) *frac_bits = f.frac_bits;
}

size_t gcnn_model_class_count(const gcnn_model* model) { return model == nullptr ? 0 : model->net.class_count(); }

void gcnn_model_free(gcnn_model* model) { delete model; }

gcnn_status gcnn_encrypt_image(const gcnn_model* model, gcnn_backend backend, const gcnn_key* key,
                               const char* image_path, uint64_t seed, gcnn_bundle** out) {
    return guarded([&] {
        require(model, "model");
        require(image_path, "image path");
        require(out, "output handle");
        const auto values = gcnn::load_image(image_path, model->net.input);
        auto h = std::make_unique<gcnn_bundle>();
        h->bundle = encrypt_into(model->net, backend, key, values, seed);
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_encrypt_values(const gcnn_model* model, gcnn_backend backend, const gcnn_key* key,
                                const double* values, size_t count, uint64_t seed, gcnn_bundle** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "output handle");
        if (count > 0) require(values, "values");
        std::vector<double> v(values, values + count);
        for (double x : v)
            if (!(x >= -1.0 && x <= 1.0)) gcnn::fail(gcnn::ErrorKind::Range, "image values must lie in [-1, 1]");
        auto h = std::make_unique<gcnn_bundle>();
        h->bundle = encrypt_into(model->net, backend, key, v, seed);
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_bundle_load(const char* path, gcnn_bundle** out) {
    return guarded([&] {
        require(path, "bundle path");
        require(out, "output handle");
        auto h = std::make_unique<gcnn_bundle>();
        h->bundle = gcnn::load_bundle(path);
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_bundle_save(const gcnn_bundle* bundle, const char* path) {
    return guarded([&] {
        require(bundle, "bundle");
        require(path, "output path");
        gcnn::save_bundle(path, bundle->bundle);
        return GCNN_OK;
    });
}

gcnn_backend gcnn_bundle_backend(const gcnn_bundle* bundle) {
    return bundle != nullptr && bundle->bundle.backend == gcnn::BackendKind::Gsw ? GCNN_BACKEND_GSW
                                                                                : GCNN_BACKEND_CLEAR;
}

gcnn_payload gcnn_bundle_payload(const gcnn_bundle* bundle) {
    return bundle != nullptr && bundle->bundle.payload == gcnn::PayloadKind::Scores ? GCNN_PAYLOAD_SCORES
                                                                                    : GCNN_PAYLOAD_IMAGE;
}

size_t gcnn_bundle_value_count(const gcnn_bundle* bundle) {
    return bundle == nullptr ? 0 : bundle->bundle.values.size();
}

void gcnn_bundle_free(gcnn_bundle* bundle) { delete bundle; }

gcnn_status gcnn_classify(const gcnn_model* model, const gcnn_bundle* image, const gcnn_key* key,
                          const gcnn_classify_options* options, gcnn_bundle** scores, gcnn_gate_stats* stats) {
    return guarded([&] {
        require(model, "model");
        require(image, "image bundle");
        require(scores, "output handle");
        const gcnn::CipherBundle& in = image->bundle;
        const gcnn::NetworkSpec& net = model->net;
        if (in.payload != gcnn::PayloadKind::Image)
            gcnn::fail(gcnn::ErrorKind::Usage, "classify expects an encrypted image, not scores");
        net.validate();
        if (!(in.shape == net.input))
            gcnn::fail(gcnn::ErrorKind::Shape, "encrypted image has shape " + gcnn::to_string(in.shape) +
                                                   ", the model expects " + gcnn::to_string(net.input));
        if (!(in.format == net.format))
            gcnn::fail(gcnn::ErrorKind::Shape, "encrypted image uses a different fixed-point format from the model");

        gcnn::InferenceOptions opts;
        if (options != nullptr) {
            opts.workers = options->workers == 0 ? 1 : options->workers;
            opts.encrypt_weights = options->encrypt_weights != 0;
            opts.weight_seed = options->seed;
        }
        const std::uint64_t seed = options != nullptr ? options->seed : 0;

        std::unique_ptr<gcnn::BitBackend> be;
        if (in.backend == gcnn::BackendKind::Gsw) {
            key_for(in, key);
            be = std::make_unique<gcnn::GswBackend>(key->key, seed);
        } else {
            be = std::make_unique<gcnn::ClearBackend>();
        }

        const auto start = std::chrono::steady_clock::now();
        gcnn::EncImage img{in.shape, in.values};
        gcnn::EncScores result = gcnn::classify(*be, img, net, opts);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

        auto h = std::make_unique<gcnn_bundle>();
        h->bundle.backend = in.backend;
        h->bundle.params = in.params;
        h->bundle.payload = gcnn::PayloadKind::Scores;
        h->bundle.format = net.format;
        h->bundle.shape = net.shapes().back();
        h->bundle.values = std::move(result.scores);
        if (stats != nullptr) {
            stats->nand_count = be->stats().nand_count();
            stats->constant_count = be->stats().constant_count();
            stats->refresh_count = be->stats().refresh_count();
            stats->overflow_count = be->overflow_count();
            stats->max_noise = be->stats().max_noise_seen();
            stats->seconds = elapsed.count();
        }
        *scores = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_decrypt_scores(const gcnn_bundle* scores, const gcnn_key* key, double* values, size_t capacity,
                                size_t* count, size_t* label) {
    return guarded([&] {
        require(scores, "scores bundle");
        const gcnn::CipherBundle& b = scores->bundle;
        std::vector<double> out;
        out.reserve(b.values.size());
        if (b.backend == gcnn::BackendKind::Gsw) {
            const gcnn::SecretKey& sk = key_for(b, key);
            for (const auto& v : b.values) {
                std::uint64_t u = 0;
                for (std::size_t i = 0; i < v.bits.width(); ++i)
                    if (decrypt_verified(sk, v.bits[i])) u |= std::uint64_t{1} << i;
                const unsigned w = v.format.total_bits;
                if (w < 64 && ((u >> (w - 1)) & 1u)) u |= ~std::uint64_t{0} << w;
                out.push_back(v.format.to_real(static_cast<std::int64_t>(u)));
            }
        } else {
            gcnn::ClearBackend be;
            for (const auto& v : b.values) out.push_back(gcnn::decode(be, v));
        }
        if (values != nullptr && capacity < out.size())
            gcnn::fail(gcnn::ErrorKind::Usage, "score buffer holds " + std::to_string(capacity) + " values, " +
                                                   std::to_string(out.size()) + " needed");
        if (values != nullptr) std::copy(out.begin(), out.end(), values);
        if (count != nullptr) *count = out.size();
        if (label != nullptr) *label = out.empty() ? 0 : gcnn::argmax(out);
        return GCNN_OK;
    });
}

gcnn_status gcnn_bound(const gcnn_model* model, gcnn_report** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "output handle");
        auto h = std::make_unique<gcnn_report>();
        h->report = gcnn::theorem_bound(model->net);
        h->text = h->report.to_text();
        h->key_values = h->report.to_key_values();
        *out = h.release();
        return GCNN_OK;
    });
}

gcnn_status gcnn_verify(const gcnn_model* model, const char* const* image_paths, size_t image_count,
                        size_t workers, gcnn_report** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "output handle");
        if (image_count == 0) gcnn::fail(gcnn::ErrorKind::Usage, "verify needs at least one image");
        require(image_paths, "image paths");
        std::vector<std::vector<double>> images;
        images.reserve(image_count);
        for (std::size_t i = 0; i < image_count; ++i) {
            require(image_paths[i], "image path");
            images.push_back(gcnn::load_image(image_paths[i], model->net.input));
        }

        const gcnn::EmpiricalRun run = gcnn::empirical_error(model->net, images, workers == 0 ? 1 : workers);

        auto h = std::make_unique<gcnn_report>();
        h->report = run.report;
        h->images = run.images.size();
        h->matches = run.matches();

        std::ostringstream text;
        std::ostringstream kv;
        text << std::setprecision(6);
        kv << std::setprecision(17);
        for (std::size_t i = 0; i < run.images.size(); ++i) {
            const auto& img = run.images[i];
            text << "image " << i << "  " << image_paths[i] << "  encrypted-path class " << img.fixed_class
                 << "  reference class " << img.reference_class << "  max error " << img.max_error
                 << (img.classes_match() ? "" : "  MISMATCH") << "\n";
            kv << "image" << i << ".class=" << img.fixed_class << "\n";
            kv << "image" << i << ".reference_class=" << img.reference_class << "\n";
            kv << "image" << i << ".max_error=" << img.max_error << "\n";
        }
        text << "class matches              " << h->matches << "/" << h->images << "\n";
        text << "overflows                  " << run.overflows << "\n";
        text << "nand gates                 " << run.nand_count << "\n";
        text << run.report.to_text();
        kv << "images=" << h->images << "\n";
        kv << "matches=" << h->matches << "\n";
        kv << "overflows=" << run.overflows << "\n";
        kv << "nand_count=" << run.nand_count << "\n";
        kv << run.report.to_key_values();

        const bool ok = h->matches == h->images && !run.report.violates_rigorous_bound() && run.overflows == 0;
        if (!ok) {
            std::string why;
            if (h->matches != h->images) why += "class mismatch; ";
            if (run.report.violates_rigorous_bound()) why += "error above bound plus slack; ";
            if (run.overflows != 0) why += "fixed-point overflow; ";
            why.resize(why.size() - 2);
            g_last_error = "verification failed: " + why;
        }
        text << "verdict                    " << (ok ? "PASS" : "FAIL") << "\n";
        kv << "verdict=" << (ok ? "pass" : "fail") << "\n";
        h->text = text.str();
        h->key_values = kv.str();
        *out = h.release();
        return ok ? GCNN_OK : GCNN_ERR_VERIFY;
    });
}

gcnn_status gcnn_save_text(const char* path, const char* text) {
    return guarded([&] {
        require(path, "output path");
        require(text, "text");
        gcnn::save_file_atomic(path, text);
        return GCNN_OK;
    });
}

const char* gcnn_report_text(const gcnn_report* report, int key_values) {
    if (report == nullptr) return "";
    return key_values != 0 ? report->key_values.c_str() : report->text.c_str();
}

double gcnn_report_r_product(const gcnn_report* report) { return report == nullptr ? 0.0 : report->report.r_product; }

double gcnn_report_total_bound(const gcnn_report* report) {
    return report == nullptr ? 0.0 : report->report.total_bound;
}

double gcnn_report_rescaling_slack(const gcnn_report* report) {
    return report == nullptr ? 0.0 : report->report.rescaling_slack;
}

size_t gcnn_report_image_count(const gcnn_report* report) { return report == nullptr ? 0 : report->images; }

size_t gcnn_report_matches(const gcnn_report* report) { return report == nullptr ? 0 : report->matches; }

double gcnn_report_mean_error(const gcnn_report* report) {
    return report == nullptr ? 0.0 : report->report.empirical_mean.value_or(0.0);
}

double gcnn_report_max_error(const gcnn_report* report) {
    return report == nullptr ? 0.0 : report->report.empirical_max_error.value_or(0.0);
}

void gcnn_report_free(gcnn_report* report) { delete report; }

}  // extern "C"
