#include "persona/adapter_store.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "persona/errors.hpp"
#include "persona/privacy.hpp"

namespace persona {

namespace fs = std::filesystem;

namespace {

// Filenames are percent-encoded user ids; identity lives in the file header,
// the name only needs to be unique and filesystem-safe.
std::string encode_filename(std::string_view user_id) {
  static const char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : user_id) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
        c == '-' || c == '_') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out + ".plra";
}

std::vector<uint8_t> read_all_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open adapter file: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace

StorageReport storage_report_from_sizes(
    std::span<const uint64_t> sizes, std::span<const uint64_t> extrapolation_counts,
    std::optional<double> baseline_bytes_per_user) {
  StorageReport report;
  report.user_count = sizes.size();
  for (uint64_t s : sizes) report.total_bytes += s;
  report.mean_bytes = sizes.empty() ? 0.0
                                    : static_cast<double>(report.total_bytes) /
                                          static_cast<double>(sizes.size());
  for (uint64_t count : extrapolation_counts) {
    report.projections.emplace_back(count,
                                    report.mean_bytes * static_cast<double>(count));
  }
  if (baseline_bytes_per_user) {
    report.baseline_bytes_per_user = baseline_bytes_per_user;
    for (uint64_t count : extrapolation_counts) {
      report.baseline_projections.emplace_back(
          count, *baseline_bytes_per_user * static_cast<double>(count));
    }
  }
  return report;
}

std::string StorageReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["user_count"] = user_count;
  doc["total_bytes"] = total_bytes;
  doc["mean_bytes_per_adapter"] = mean_bytes;
  auto projection_array = nlohmann::ordered_json::array();
  for (const auto& [users, bytes] : projections) {
    projection_array.push_back({{"users", users}, {"projected_bytes", bytes}});
  }
  doc["projections"] = std::move(projection_array);
  if (baseline_bytes_per_user) {
    doc["baseline_bytes_per_user"] = *baseline_bytes_per_user;
    auto baseline_array = nlohmann::ordered_json::array();
    for (const auto& [users, bytes] : baseline_projections) {
      baseline_array.push_back({{"users", users}, {"projected_bytes", bytes}});
    }
    doc["baseline_projections"] = std::move(baseline_array);
  }
  return doc.dump(2);
}

AdapterStore::AdapterStore(fs::path root, size_t cache_capacity)
    : root_(std::move(root)), cache_capacity_(cache_capacity) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) throw StorageError("cannot create store root: " + root_.string());
  std::lock_guard<std::mutex> lock(mutex_);
  rescan_locked();
}

void AdapterStore::rescan_locked() {
  catalog_.clear();
  for (const auto& dir_entry : fs::directory_iterator(root_)) {
    if (!dir_entry.is_regular_file()) continue;
    if (dir_entry.path().extension() != ".plra") continue;
    std::vector<uint8_t> bytes = read_all_bytes(dir_entry.path());
    ++file_reads_;
    LoraAdapter adapter;
    try {
      adapter = LoraAdapter::deserialize(bytes);
    } catch (const StorageError&) {
      continue;  // stray or corrupt file; never shadows a good adapter
    }
    CatalogEntry entry;
    entry.path = dir_entry.path();
    entry.bytes = bytes.size();
    entry.base_fingerprint = adapter.base_fingerprint;
    entry.rank = adapter.rank;
    entry.alpha = adapter.alpha;
    catalog_[adapter.user_id] = std::move(entry);
  }
}

SaveReceipt AdapterStore::save_adapter(const LoraAdapter& adapter, bool overwrite) {
  if (adapter.user_id.empty()) throw StorageError("adapter user_id is empty");
  std::lock_guard<std::mutex> lock(mutex_);
  auto existing = catalog_.find(adapter.user_id);
  if (existing != catalog_.end() && !overwrite) {
    throw StorageError("adapter for user '" + adapter.user_id +
                       "' already exists (pass overwrite to replace)");
  }

  std::vector<uint8_t> bytes = adapter.serialize();
  fs::path final_path = root_ / encode_filename(adapter.user_id);
  fs::path temp_path = final_path;
  temp_path += ".tmp" + std::to_string(++temp_counter_);

  {
    std::ofstream out(temp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write temp file: " + temp_path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StorageError("short write to " + temp_path.string());
  }
  std::error_code ec;
  fs::rename(temp_path, final_path, ec);
  if (ec) {
    fs::remove(temp_path, ec);
    throw StorageError("atomic rename failed for " + final_path.string());
  }

  CatalogEntry entry;
  entry.path = final_path;
  entry.bytes = bytes.size();
  entry.base_fingerprint = adapter.base_fingerprint;
  entry.rank = adapter.rank;
  entry.alpha = adapter.alpha;
  catalog_[adapter.user_id] = entry;

  // Stale cache entries must not survive an overwrite.
  auto it = cache_index_.find(adapter.user_id);
  if (it != cache_index_.end()) {
    cache_.erase(it->second);
    cache_index_.erase(it);
  }

  SaveReceipt receipt;
  receipt.path = final_path;
  receipt.bytes = bytes.size();
  receipt.checksum = crc32(std::span<const uint8_t>(bytes.data(), bytes.size() - 4));
  return receipt;
}

std::optional<LoraAdapter> AdapterStore::cache_get_locked(const std::string& user_id) {
  auto it = cache_index_.find(user_id);
  if (it == cache_index_.end()) return std::nullopt;
  cache_.splice(cache_.begin(), cache_, it->second);
  return cache_.front().second;
}

void AdapterStore::cache_put_locked(const std::string& user_id,
                                    const LoraAdapter& adapter) {
  if (cache_capacity_ == 0) return;
  auto it = cache_index_.find(user_id);
  if (it != cache_index_.end()) {
    cache_.erase(it->second);
    cache_index_.erase(it);
  }
  cache_.emplace_front(user_id, adapter);
  cache_index_[user_id] = cache_.begin();
  while (cache_.size() > cache_capacity_) {
    cache_index_.erase(cache_.back().first);
    cache_.pop_back();
  }
}

LoraAdapter AdapterStore::read_file_locked(const CatalogEntry& entry) {
  std::vector<uint8_t> bytes = read_all_bytes(entry.path);
  ++file_reads_;
  return LoraAdapter::deserialize(bytes);
}

LoraAdapter AdapterStore::load_adapter(std::string_view user_id) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = catalog_.find(std::string(user_id));
  if (it == catalog_.end()) {
    throw StorageError("no adapter stored for user '" + std::string(user_id) + "'");
  }
  std::string key(user_id);
  if (auto cached = cache_get_locked(key)) {
    privacy::on_access(cached->user_id);
    return *cached;
  }
  LoraAdapter adapter = read_file_locked(it->second);
  if (adapter.user_id != key) {
    throw StorageError("adapter file " + it->second.path.string() +
                       " belongs to user '" + adapter.user_id + "'");
  }
  cache_put_locked(key, adapter);
  privacy::on_access(adapter.user_id);
  return adapter;
}

LoraAdapter AdapterStore::load_adapter(std::string_view user_id,
                                       const Fingerprint& expected_base) {
  LoraAdapter adapter = load_adapter(user_id);
  if (adapter.base_fingerprint != expected_base) {
    throw StorageError("adapter for user '" + std::string(user_id) +
                       "' was trained against a different base model");
  }
  return adapter;
}

bool AdapterStore::contains(std::string_view user_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return catalog_.count(std::string(user_id)) > 0;
}

std::optional<CatalogEntry> AdapterStore::lookup(std::string_view user_id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = catalog_.find(std::string(user_id));
  if (it == catalog_.end()) return std::nullopt;
  return it->second;
}

size_t AdapterStore::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return catalog_.size();
}

uint64_t AdapterStore::file_reads() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return file_reads_;
}

StorageReport AdapterStore::storage_report(
    std::span<const uint64_t> extrapolation_counts,
    std::optional<double> baseline_bytes_per_user) const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<uint64_t> sizes;
  sizes.reserve(catalog_.size());
  for (const auto& [user, entry] : catalog_) {
    (void)user;
    sizes.push_back(entry.bytes);
  }
  return storage_report_from_sizes(sizes, extrapolation_counts,
                                   baseline_bytes_per_user);
}

}  // namespace persona
