#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace persona {

using Fingerprint = std::array<uint8_t, 32>;

// CRC-32 (IEEE 802.3, reflected, poly 0xEDB88320).
uint32_t crc32(std::span<const uint8_t> data, uint32_t seed = 0);

// SHA-256 over arbitrary bytes (OpenSSL-backed).
Fingerprint sha256(std::span<const uint8_t> data);

// Incremental SHA-256 for hashing model weights without a flat copy.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;

  void update(std::span<const uint8_t> data);
  void update_text(std::string_view text);
  void update_u32(uint32_t value);    // little-endian
  void update_f64(double value);      // little-endian IEEE-754 bytes
  Fingerprint finish();

 private:
  void* ctx_;
};

std::string to_hex(std::span<const uint8_t> bytes);

}  // namespace persona
