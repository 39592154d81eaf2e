#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "persona/adapter.hpp"

namespace persona {

struct SaveReceipt {
  std::filesystem::path path;
  uint64_t bytes = 0;
  uint32_t checksum = 0;
};

struct CatalogEntry {
  std::filesystem::path path;
  uint64_t bytes = 0;
  Fingerprint base_fingerprint{};
  uint32_t rank = 0;
  float alpha = 0.0f;
};

// Storage accounting with linear extrapolation to hypothetical user counts.
// Sizes are decimal (SI) bytes.
struct StorageReport {
  uint64_t user_count = 0;
  uint64_t total_bytes = 0;
  double mean_bytes = 0.0;
  std::vector<std::pair<uint64_t, double>> projections;  // (users, bytes)
  std::optional<double> baseline_bytes_per_user;          // e.g. a full model
  std::vector<std::pair<uint64_t, double>> baseline_projections;

  std::string to_json() const;
};

StorageReport storage_report_from_sizes(
    std::span<const uint64_t> sizes, std::span<const uint64_t> extrapolation_counts,
    std::optional<double> baseline_bytes_per_user = std::nullopt);

// One adapter file per user under a root directory. Saves are atomic
// (write-temp-then-rename); loads verify the CRC and, when requested, the
// base-model fingerprint. A bounded LRU cache sits in front of the files.
class AdapterStore {
 public:
  explicit AdapterStore(std::filesystem::path root, size_t cache_capacity = 64);

  SaveReceipt save_adapter(const LoraAdapter& adapter, bool overwrite = false);

  LoraAdapter load_adapter(std::string_view user_id);
  LoraAdapter load_adapter(std::string_view user_id,
                           const Fingerprint& expected_base);

  bool contains(std::string_view user_id) const;
  std::optional<CatalogEntry> lookup(std::string_view user_id) const;
  size_t size() const;

  // Number of file reads performed; cache hits do not count.
  uint64_t file_reads() const;

  StorageReport storage_report(std::span<const uint64_t> extrapolation_counts,
                               std::optional<double> baseline_bytes_per_user =
                                   std::nullopt) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  void rescan_locked();
  LoraAdapter read_file_locked(const CatalogEntry& entry);
  void cache_put_locked(const std::string& user_id, const LoraAdapter& adapter);
  std::optional<LoraAdapter> cache_get_locked(const std::string& user_id);

  std::filesystem::path root_;
  size_t cache_capacity_;
  mutable std::mutex mutex_;
  std::map<std::string, CatalogEntry> catalog_;
  std::list<std::pair<std::string, LoraAdapter>> cache_;  // front = most recent
  std::map<std::string, std::list<std::pair<std::string, LoraAdapter>>::iterator>
      cache_index_;
  uint64_t file_reads_ = 0;
  uint64_t temp_counter_ = 0;
};

}  // namespace persona
