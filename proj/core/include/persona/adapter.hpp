#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "persona/checksum.hpp"

namespace persona {

// LoRA hyperparameters. `use_alpha_scaling` selects the standard
// (alpha / rank) * A * B update; disabling it recovers the literal
// W = W0 + A*B. Dropout applies to the adapter input path during training
// only; dropout and the scaling switch are not part of the serialized
// artifact (the file format carries rank and alpha).
struct LoraConfig {
  int rank = 8;
  double alpha = 32.0;
  double dropout = 0.1;
  std::set<std::string> targets = {"key", "query", "value"};
  bool use_alpha_scaling = true;

  double scaling() const {
    return use_alpha_scaling ? alpha / static_cast<double>(rank) : 1.0;
  }
  uint64_t cache_key() const;  // for train-once adapter reuse
};

// One adapted projection, f32 as stored on disk.
struct AdapterTarget {
  std::string name;  // e.g. "enc.0.self.q"
  uint32_t d = 0;    // input dimension
  uint32_t k = 0;    // output dimension
  Eigen::MatrixXf a;  // d x r
  Eigen::MatrixXf b;  // r x k
};

// Per-user trained adapter artifact.
//
// File format (normative, little-endian): magic "PLRA", version u16,
// user_id (u16 length + UTF-8), base fingerprint (32 bytes), rank u32,
// alpha f32, target count u32, then per target: name (u16 + UTF-8), d u32,
// k u32, A row-major f32[d*r], B row-major f32[r*k]; trailing CRC32 over
// all preceding bytes.
struct LoraAdapter {
  std::string user_id;
  Fingerprint base_fingerprint{};
  uint32_t rank = 0;
  float alpha = 0.0f;
  std::vector<AdapterTarget> targets;  // sorted by name

  std::vector<uint8_t> serialize() const;
  static LoraAdapter deserialize(std::span<const uint8_t> bytes);

  // Exact byte size serialize() will produce.
  size_t serialized_size() const;

  double scaling() const { return static_cast<double>(alpha) / rank; }
  size_t parameter_count() const;  // sum of r*(d+k) over targets
};

inline constexpr uint16_t kAdapterFormatVersion = 1;

}  // namespace persona
