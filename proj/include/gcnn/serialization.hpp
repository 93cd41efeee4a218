// SPDX-License-Identifier: Apache-2.0
//
// Binary key and ciphertext files. All integers little-endian.
//
//   header (24 bytes)
//     0  char[4]  magic "GCN1"
//     4  u8       kind: 1 secret key, 2 ciphertext bundle
//     5  u8       preset id: 0 toy, 1 demo, 0xFE custom, 0xFF none (clear backend)
//     6  u8       log_q (0 when no key is involved)
//     7  u8       reserved, 0
//     8  u32      ct_dim
//     12 u32      lattice_dim
//     16 f64      noise_stddev
//
//   secret key body
//     u64 count (= lattice_dim + 1), then count entries of ceil(log_q / 8) bytes
//
//   ciphertext bundle body
//     u8 backend (0 clear, 1 gsw), u8 payload (1 image, 2 scores),
//     u8 total_bits, u8 frac_bits, u32 channels, u32 height, u32 width,
//     u64 value_count, then value_count * total_bits bit records, LSB first:
//       clear record: u8 bit
//       gsw record:   u8 flags (bit 0: trivial), f64 noise_estimate,
//                     u64 entry_count (= ct_dim^2), row-major entries of
//                     ceil(log_q / 8) bytes

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gcnn/cnn.hpp"

namespace gcnn {

enum class PayloadKind : std::uint8_t { Image = 1, Scores = 2 };

struct CipherBundle {
    BackendKind backend = BackendKind::Clear;
    std::optional<FheParams> params;  // set for gsw bundles
    PayloadKind payload = PayloadKind::Image;
    FixedPointFormat format;
    Shape shape;
    std::vector<FixedPointCipher> values;
};

void write_secret_key(std::ostream& out, const SecretKey& key);
SecretKey read_secret_key(std::istream& in);

void write_bundle(std::ostream& out, const CipherBundle& bundle);
CipherBundle read_bundle(std::istream& in);

/// Writes via a temporary file in the same directory and renames it over `path`.
void save_file_atomic(const std::string& path, const std::string& bytes);
std::string load_file(const std::string& path);

void save_secret_key(const std::string& path, const SecretKey& key);
SecretKey load_secret_key(const std::string& path);
void save_bundle(const std::string& path, const CipherBundle& bundle);
CipherBundle load_bundle(const std::string& path);

}  // namespace gcnn
