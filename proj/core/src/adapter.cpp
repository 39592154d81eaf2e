#include "persona/adapter.hpp"

#include <cstring>

#include "persona/errors.hpp"
#include "persona/rng.hpp"

namespace persona {

uint64_t LoraConfig::cache_key() const {
  std::string repr = std::to_string(rank) + "|" + std::to_string(alpha) + "|" +
                     std::to_string(dropout) + "|" +
                     (use_alpha_scaling ? "s" : "n");
  for (const auto& t : targets) repr += "|" + t;
  return fnv1a64(repr);
}

namespace {

constexpr char kMagic[4] = {'P', 'L', 'R', 'A'};

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

void put_string16(std::vector<uint8_t>& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw StorageError("string too long for adapter format");
  put_u16(out, static_cast<uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

void put_matrix_row_major(std::vector<uint8_t>& out, const Eigen::MatrixXf& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      put_f32(out, m(r, c));
    }
  }
}

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string string16() {
    uint16_t len = u16();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  void raw(uint8_t* dst, size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  size_t pos() const { return pos_; }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw StorageError("adapter file truncated");
    }
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

size_t LoraAdapter::serialized_size() const {
  size_t size = 4 + 2;                    // magic + version
  size += 2 + user_id.size();             // user id
  size += 32;                             // fingerprint
  size += 4 + 4 + 4;                      // rank + alpha + target count
  for (const auto& t : targets) {
    size += 2 + t.name.size() + 4 + 4;    // name + d + k
    size += 4 * (static_cast<size_t>(t.d) * rank + static_cast<size_t>(rank) * t.k);
  }
  size += 4;                              // crc32
  return size;
}

size_t LoraAdapter::parameter_count() const {
  size_t count = 0;
  for (const auto& t : targets) {
    count += static_cast<size_t>(rank) * (t.d + t.k);
  }
  return count;
}

std::vector<uint8_t> LoraAdapter::serialize() const {
  std::vector<uint8_t> out;
  out.reserve(serialized_size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u16(out, kAdapterFormatVersion);
  put_string16(out, user_id);
  out.insert(out.end(), base_fingerprint.begin(), base_fingerprint.end());
  put_u32(out, rank);
  put_f32(out, alpha);
  put_u32(out, static_cast<uint32_t>(targets.size()));
  for (const auto& t : targets) {
    if (t.a.rows() != static_cast<Eigen::Index>(t.d) ||
        t.a.cols() != static_cast<Eigen::Index>(rank) ||
        t.b.rows() != static_cast<Eigen::Index>(rank) ||
        t.b.cols() != static_cast<Eigen::Index>(t.k)) {
      throw StorageError("adapter target " + t.name + " has inconsistent shapes");
    }
    put_string16(out, t.name);
    put_u32(out, t.d);
    put_u32(out, t.k);
    put_matrix_row_major(out, t.a);
    put_matrix_row_major(out, t.b);
  }
  put_u32(out, crc32(out));
  return out;
}

LoraAdapter LoraAdapter::deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 4) throw StorageError("adapter file too small");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw StorageError("bad adapter magic; not a PLRA file");
  }
  uint32_t stored_crc = 0;
  for (int i = 0; i < 4; ++i) {
    stored_crc |= static_cast<uint32_t>(bytes[bytes.size() - 4 + i]) << (8 * i);
  }
  uint32_t actual_crc = crc32(bytes.subspan(0, bytes.size() - 4));
  if (stored_crc != actual_crc) {
    throw StorageError("adapter checksum mismatch; file is corrupt");
  }

  Reader reader(bytes.subspan(4, bytes.size() - 8));
  LoraAdapter adapter;
  uint16_t version = reader.u16();
  if (version != kAdapterFormatVersion) {
    throw StorageError("unsupported adapter format version " + std::to_string(version));
  }
  adapter.user_id = reader.string16();
  reader.raw(adapter.base_fingerprint.data(), adapter.base_fingerprint.size());
  adapter.rank = reader.u32();
  adapter.alpha = reader.f32();
  if (adapter.rank == 0) throw StorageError("adapter rank must be >= 1");
  uint32_t target_count = reader.u32();
  adapter.targets.reserve(target_count);
  for (uint32_t i = 0; i < target_count; ++i) {
    AdapterTarget t;
    t.name = reader.string16();
    t.d = reader.u32();
    t.k = reader.u32();
    t.a = Eigen::MatrixXf(t.d, adapter.rank);
    t.b = Eigen::MatrixXf(adapter.rank, t.k);
    for (uint32_t r = 0; r < t.d; ++r) {
      for (uint32_t c = 0; c < adapter.rank; ++c) t.a(r, c) = reader.f32();
    }
    for (uint32_t r = 0; r < adapter.rank; ++r) {
      for (uint32_t c = 0; c < t.k; ++c) t.b(r, c) = reader.f32();
    }
    adapter.targets.push_back(std::move(t));
  }
  return adapter;
}

}  // namespace persona
