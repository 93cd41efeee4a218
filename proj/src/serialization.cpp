// SPDX-License-Identifier: Apache-2.0

#include "gcnn/serialization.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "gcnn/error.hpp"

namespace gcnn {

namespace {

constexpr char kMagic[4] = {'G', 'C', 'N', '1'};
constexpr std::uint8_t kKindKey = 1;
constexpr std::uint8_t kKindBundle = 2;
constexpr std::uint8_t kPresetNone = 0xFF;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u(std::uint64_t value, unsigned bytes) {
        for (unsigned i = 0; i < bytes; ++i) out_.put(static_cast<char>((value >> (8 * i)) & 0xFF));
    }
    void u8(std::uint8_t v) { u(v, 1); }
    void u32(std::uint32_t v) { u(v, 4); }
    void u64(std::uint64_t v) { u(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
    void check() {
        if (!out_) fail(ErrorKind::Io, "write failed");
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint64_t u(unsigned bytes) {
        std::uint64_t value = 0;
        for (unsigned i = 0; i < bytes; ++i) {
            const int c = in_.get();
            if (c == std::char_traits<char>::eof()) fail(ErrorKind::Format, "unexpected end of file");
            value |= std::uint64_t(static_cast<unsigned char>(c)) << (8 * i);
        }
        return value;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(u(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
    std::uint64_t u64() { return u(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    void raw(char* data, std::size_t n) {
        in_.read(data, static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) fail(ErrorKind::Format, "unexpected end of file");
    }
    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) fail(ErrorKind::Format, "trailing bytes after payload");
    }

private:
    std::istream& in_;
};

struct Header {
    std::uint8_t kind = 0;
    std::uint8_t preset = kPresetNone;
    std::uint8_t log_q = 0;
    std::uint32_t ct_dim = 0;
    std::uint32_t lattice_dim = 0;
    double noise_stddev = 0.0;
};

unsigned entry_bytes(unsigned log_q) { return (log_q + 7) / 8; }

void write_header(Writer& w, const Header& h) {
    w.raw(kMagic, 4);
    w.u8(h.kind);
    w.u8(h.preset);
    w.u8(h.log_q);
    w.u8(0);
    w.u32(h.ct_dim);
    w.u32(h.lattice_dim);
    w.f64(h.noise_stddev);
}

Header read_header(Reader& r) {
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "bad magic: not a GCN1 file");
    Header h;
    h.kind = r.u8();
    h.preset = r.u8();
    h.log_q = r.u8();
    if (r.u8() != 0) fail(ErrorKind::Format, "reserved header byte is not zero");
    h.ct_dim = r.u32();
    h.lattice_dim = r.u32();
    h.noise_stddev = r.f64();
    return h;
}

Header header_for(const FheParams& p, std::uint8_t kind) {
    return Header{kind, static_cast<std::uint8_t>(p.preset), static_cast<std::uint8_t>(p.log_q),
                  static_cast<std::uint32_t>(p.ct_dim), static_cast<std::uint32_t>(p.lattice_dim), p.noise_stddev};
}

FheParams params_from(const Header& h) {
    if (h.preset == kPresetNone) fail(ErrorKind::Format, "header carries no scheme parameters");
    try {
        FheParams p = FheParams::make(h.lattice_dim, h.log_q, h.noise_stddev, static_cast<Preset>(h.preset));
        if (p.ct_dim != h.ct_dim) fail(ErrorKind::Format, "ct_dim in header is inconsistent");
        if (h.preset != static_cast<std::uint8_t>(Preset::Custom) &&
            !(p == FheParams::from_preset(static_cast<Preset>(h.preset))))
            fail(ErrorKind::Format, "header parameters do not match the named preset");
        return p;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Format) throw;
        fail(ErrorKind::Format, std::string("invalid scheme parameters in header: ") + e.what());
    }
}

void write_ciphertext(Writer& w, const Ciphertext& ct, unsigned bytes) {
    w.u8(ct.is_trivial() ? 1 : 0);
    w.f64(ct.noise_estimate());
    w.u64(ct.matrix().size());
    for (std::uint16_t v : ct.matrix()) w.u(v, bytes);
}

Ciphertext read_ciphertext(Reader& r, const FheParams& p) {
    const std::uint8_t flags = r.u8();
    if (flags > 1) fail(ErrorKind::Format, "unknown ciphertext flags");
    const double noise = r.f64();
    const std::uint64_t count = r.u64();
    if (count != std::uint64_t{p.ct_dim} * p.ct_dim) fail(ErrorKind::Format, "ciphertext entry count mismatch");
    const unsigned bytes = entry_bytes(p.log_q);
    std::vector<std::uint16_t> m(count);
    for (auto& v : m) {
        const std::uint64_t x = r.u(bytes);
        if (x >= p.modulus) fail(ErrorKind::Format, "ciphertext entry outside [0, q)");
        v = static_cast<std::uint16_t>(x);
    }
    if (flags & 1) {
        Ciphertext zero = Ciphertext::trivial(p.ct_dim, false);
        Ciphertext one = Ciphertext::trivial(p.ct_dim, true);
        if (m == one.matrix()) return one;
        if (m == zero.matrix()) return zero;
        fail(ErrorKind::Format, "record flagged trivial is not a trivial encoding");
    }
    if (!(noise >= 0.0)) fail(ErrorKind::Format, "invalid noise estimate");
    return Ciphertext(p.ct_dim, std::move(m), noise);
}

}  // namespace

void write_secret_key(std::ostream& out, const SecretKey& key) {
    key.params.validate();
    Writer w(out);
    write_header(w, header_for(key.params, kKindKey));
    w.u64(key.secret_vector.size());
    const unsigned bytes = entry_bytes(key.params.log_q);
    for (std::uint16_t v : key.secret_vector) w.u(v, bytes);
    w.check();
}

SecretKey read_secret_key(std::istream& in) {
    Reader r(in);
    const Header h = read_header(r);
    if (h.kind != kKindKey) fail(ErrorKind::Format, "file is not a secret key");
    SecretKey key{params_from(h), {}};
    const std::uint64_t count = r.u64();
    if (count != key.params.lattice_dim + 1) fail(ErrorKind::Format, "secret vector length mismatch");
    const unsigned bytes = entry_bytes(key.params.log_q);
    key.secret_vector.resize(count);
    for (auto& v : key.secret_vector) {
        const std::uint64_t x = r.u(bytes);
        if (x >= key.params.modulus) fail(ErrorKind::Format, "secret entry outside [0, q)");
        v = static_cast<std::uint16_t>(x);
    }
    if (key.secret_vector.back() != 1) fail(ErrorKind::Format, "secret vector must end in 1");
    r.expect_end();
    return key;
}

void write_bundle(std::ostream& out, const CipherBundle& b) {
    Writer w(out);
    if (b.backend == BackendKind::Gsw) {
        if (!b.params) fail(ErrorKind::Usage, "gsw bundle without scheme parameters");
        write_header(w, header_for(*b.params, kKindBundle));
    } else {
        write_header(w, Header{kKindBundle, kPresetNone, 0, 0, 0, 0.0});
    }
    if (b.values.size() != b.shape.size()) fail(ErrorKind::Shape, "bundle value count does not match its shape");
    w.u8(static_cast<std::uint8_t>(b.backend));
    w.u8(static_cast<std::uint8_t>(b.payload));
    w.u8(static_cast<std::uint8_t>(b.format.total_bits));
    w.u8(static_cast<std::uint8_t>(b.format.frac_bits));
    w.u32(static_cast<std::uint32_t>(b.shape.channels));
    w.u32(static_cast<std::uint32_t>(b.shape.height));
    w.u32(static_cast<std::uint32_t>(b.shape.width));
    w.u64(b.values.size());
    const unsigned bytes = b.params ? entry_bytes(b.params->log_q) : 0;
    for (const auto& value : b.values) {
        if (!(value.format == b.format) || value.bits.width() != b.format.total_bits)
            fail(ErrorKind::Shape, "bundle value has the wrong fixed-point format");
        for (const auto& bit : value.bits.bits) {
            if (bit.kind() != b.backend) fail(ErrorKind::Usage, "bundle mixes backends");
            if (b.backend == BackendKind::Clear)
                w.u8(bit.clear_value() ? 1 : 0);
            else
                write_ciphertext(w, *bit.ciphertext(), bytes);
        }
    }
    w.check();
}

CipherBundle read_bundle(std::istream& in) {
    Reader r(in);
    const Header h = read_header(r);
    if (h.kind != kKindBundle) fail(ErrorKind::Format, "file is not a ciphertext bundle");
    CipherBundle b;
    const std::uint8_t backend = r.u8();
    if (backend > 1) fail(ErrorKind::Format, "unknown backend tag");
    b.backend = static_cast<BackendKind>(backend);
    if (b.backend == BackendKind::Gsw) b.params = params_from(h);
    else if (h.preset != kPresetNone) fail(ErrorKind::Format, "clear bundle with scheme parameters");
    const std::uint8_t payload = r.u8();
    if (payload != 1 && payload != 2) fail(ErrorKind::Format, "unknown payload kind");
    b.payload = static_cast<PayloadKind>(payload);
    b.format.total_bits = r.u8();
    b.format.frac_bits = r.u8();
    try {
        b.format.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Format, e.what());
    }
    b.shape.channels = r.u32();
    b.shape.height = r.u32();
    b.shape.width = r.u32();
    const std::uint64_t count = r.u64();
    if (count != b.shape.size()) fail(ErrorKind::Format, "value count does not match the stored shape");
    b.values.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::vector<EncBit> bits;
        bits.reserve(b.format.total_bits);
        for (unsigned k = 0; k < b.format.total_bits; ++k) {
            if (b.backend == BackendKind::Clear) {
                const std::uint8_t v = r.u8();
                if (v > 1) fail(ErrorKind::Format, "clear bit record is not 0 or 1");
                bits.push_back(EncBit::clear(v == 1));
            } else {
                bits.push_back(EncBit::gsw(std::make_shared<const Ciphertext>(read_ciphertext(r, *b.params))));
            }
        }
        b.values.push_back(FixedPointCipher{BitVector(std::move(bits)), b.format});
    }
    r.expect_end();
    return b;
}

void save_file_atomic(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) fail(ErrorKind::Io, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot move output into place at '" + path + "'");
    }
}

std::string load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ErrorKind::Io, "failed reading '" + path + "'");
    return ss.str();
}

void save_secret_key(const std::string& path, const SecretKey& key) {
    std::ostringstream out(std::ios::binary);
    write_secret_key(out, key);
    save_file_atomic(path, out.str());
}

SecretKey load_secret_key(const std::string& path) {
    std::istringstream in(load_file(path), std::ios::binary);
    return read_secret_key(in);
}

void save_bundle(const std::string& path, const CipherBundle& bundle) {
    std::ostringstream out(std::ios::binary);
    write_bundle(out, bundle);
    save_file_atomic(path, out.str());
}

CipherBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    return read_bundle(in);
}

}  // namespace gcnn
