#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "persona/adapter_store.hpp"
#include "persona/errors.hpp"
#include "persona/lora.hpp"
#include "persona/train.hpp"

using namespace persona;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("persona_store_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

LoraAdapter make_adapter(const std::string& user, uint64_t seed, int rank = 4) {
  ToyModelConfig cfg;
  cfg.d_model = 8;
  cfg.num_heads = 2;
  cfg.ff_dim = 16;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 1;
  WordTokenizer tok = WordTokenizer::from_words({"alpha", "beta", "gamma"});
  ToyModel base = ToyModel::create(cfg, tok, seed);
  LoraConfig lora;
  lora.rank = rank;
  AdaptedModel model(base, lora, seed + 1);
  return model.export_adapter(user);
}

}  // namespace

TEST_CASE("save then load roundtrips bitwise") {
  auto dir = fresh_dir("roundtrip");
  AdapterStore store(dir);
  LoraAdapter adapter = make_adapter("user/one", 5);

  SaveReceipt receipt = store.save_adapter(adapter);
  CHECK(receipt.bytes == adapter.serialized_size());
  CHECK(fs::file_size(receipt.path) == receipt.bytes);

  LoraAdapter loaded = store.load_adapter("user/one");
  CHECK(loaded.user_id == adapter.user_id);
  CHECK(loaded.base_fingerprint == adapter.base_fingerprint);
  CHECK(loaded.serialize() == adapter.serialize());
  REQUIRE(loaded.targets.size() == adapter.targets.size());
  for (size_t i = 0; i < loaded.targets.size(); ++i) {
    CHECK(loaded.targets[i].a == adapter.targets[i].a);
    CHECK(loaded.targets[i].b == adapter.targets[i].b);
  }
}

TEST_CASE("second save without overwrite conflicts") {
  auto dir = fresh_dir("conflict");
  AdapterStore store(dir);
  LoraAdapter adapter = make_adapter("u", 5);
  store.save_adapter(adapter);
  CHECK_THROWS_AS(store.save_adapter(adapter), StorageError);
  CHECK_NOTHROW(store.save_adapter(adapter, /*overwrite=*/true));
}

TEST_CASE("file size is exactly header plus matrices plus checksum") {
  LoraAdapter adapter = make_adapter("sizer", 5, 8);
  // header: magic(4) + version(2) + user(2+len) + fingerprint(32) +
  //         rank(4) + alpha(4) + count(4)
  size_t expected = 4 + 2 + 2 + adapter.user_id.size() + 32 + 4 + 4 + 4;
  for (const auto& t : adapter.targets) {
    expected += 2 + t.name.size() + 4 + 4;
  }
  expected += 4 * adapter.parameter_count();  // f32 payload
  expected += 4;                              // crc32
  CHECK(adapter.serialize().size() == expected);
  CHECK(adapter.serialized_size() == expected);
}

TEST_CASE("unknown user and corruption are detected") {
  auto dir = fresh_dir("corrupt");
  AdapterStore store(dir);
  CHECK_THROWS_AS(store.load_adapter("ghost"), StorageError);

  LoraAdapter adapter = make_adapter("victim", 5);
  SaveReceipt receipt = store.save_adapter(adapter);

  // Flip one byte in the middle of the payload.
  {
    std::fstream file(receipt.path,
                      std::ios::in | std::ios::out | std::ios::binary);
    file.seekp(static_cast<std::streamoff>(receipt.bytes / 2));
    char byte = 0;
    file.seekg(static_cast<std::streamoff>(receipt.bytes / 2));
    file.read(&byte, 1);
    byte = static_cast<char>(byte ^ 0xFF);
    file.seekp(static_cast<std::streamoff>(receipt.bytes / 2));
    file.write(&byte, 1);
  }
  AdapterStore reopened(dir);  // corrupt file dropped from the catalog
  CHECK_FALSE(reopened.contains("victim"));
}

TEST_CASE("fingerprint mismatch is a wrong-base-model error") {
  auto dir = fresh_dir("fingerprint");
  AdapterStore store(dir);
  LoraAdapter adapter = make_adapter("u", 5);
  store.save_adapter(adapter);
  Fingerprint other{};
  other[0] = 0xAB;
  CHECK_THROWS_AS(store.load_adapter("u", other), StorageError);
  CHECK_NOTHROW(store.load_adapter("u", adapter.base_fingerprint));
}

TEST_CASE("repeated loads hit the cache with zero file reads") {
  auto dir = fresh_dir("cache");
  AdapterStore store(dir);
  store.save_adapter(make_adapter("u", 5));

  uint64_t before = store.file_reads();
  store.load_adapter("u");
  uint64_t after_first = store.file_reads();
  CHECK(after_first == before + 1);
  store.load_adapter("u");
  store.load_adapter("u");
  CHECK(store.file_reads() == after_first);
}

TEST_CASE("overwrite invalidates the cache") {
  auto dir = fresh_dir("invalidate");
  AdapterStore store(dir);
  LoraAdapter v1 = make_adapter("u", 5);
  store.save_adapter(v1);
  store.load_adapter("u");  // cached

  LoraAdapter v2 = make_adapter("u", 99);
  store.save_adapter(v2, /*overwrite=*/true);
  LoraAdapter loaded = store.load_adapter("u");
  CHECK(loaded.serialize() == v2.serialize());
  CHECK(loaded.serialize() != v1.serialize());
}

TEST_CASE("LRU eviction keeps the cache bounded") {
  auto dir = fresh_dir("lru");
  AdapterStore store(dir, /*cache_capacity=*/2);
  store.save_adapter(make_adapter("a", 1));
  store.save_adapter(make_adapter("b", 2));
  store.save_adapter(make_adapter("c", 3));

  store.load_adapter("a");
  store.load_adapter("b");
  uint64_t reads = store.file_reads();
  store.load_adapter("c");  // evicts a
  CHECK(store.file_reads() == reads + 1);
  store.load_adapter("b");  // still cached
  CHECK(store.file_reads() == reads + 1);
  store.load_adapter("a");  // miss again
  CHECK(store.file_reads() == reads + 2);
}

TEST_CASE("a stray temp file never shadows the good adapter") {
  auto dir = fresh_dir("atomic");
  {
    AdapterStore store(dir);
    store.save_adapter(make_adapter("u", 5));
  }
  // Simulated crash between temp-write and rename.
  std::ofstream stray(dir / "u.plra.tmp99", std::ios::binary);
  stray << "half-written garbage";
  stray.close();

  AdapterStore reopened(dir);
  CHECK(reopened.size() == 1);
  CHECK_NOTHROW(reopened.load_adapter("u"));
}

TEST_CASE("storage report arithmetic and projections") {
  std::vector<uint64_t> sizes(4, 55'000'000ull);  // 55 MB each
  std::vector<uint64_t> counts = {1'000'000ull};
  StorageReport report = storage_report_from_sizes(sizes, counts, 45e9);

  CHECK(report.user_count == 4);
  CHECK(report.total_bytes == 220'000'000ull);
  CHECK(report.mean_bytes == doctest::Approx(55e6));
  REQUIRE(report.projections.size() == 1);
  CHECK(report.projections[0].second == 55e12);  // 55 TB, exactly
  REQUIRE(report.baseline_projections.size() == 1);
  CHECK(report.baseline_projections[0].second == 45e15);  // 45,000 TB

  StorageReport empty = storage_report_from_sizes({}, counts);
  CHECK(empty.user_count == 0);
  CHECK(empty.total_bytes == 0);
  CHECK(empty.projections[0].second == 0.0);
}

TEST_CASE("report invariants hold on randomized populations") {
  Rng gen(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<uint64_t> sizes;
    size_t n = 1 + gen.uniform_int(50);
    uint64_t total = 0;
    for (size_t i = 0; i < n; ++i) {
      uint64_t s = 1000 + gen.uniform_int(1'000'000);
      sizes.push_back(s);
      total += s;
    }
    std::vector<uint64_t> counts = {10, 1000, 1'000'000};
    StorageReport report = storage_report_from_sizes(sizes, counts);
    CHECK(report.total_bytes == total);
    CHECK(report.mean_bytes ==
          doctest::Approx(static_cast<double>(total) / static_cast<double>(n)));
    for (const auto& [users, bytes] : report.projections) {
      CHECK(bytes ==
            doctest::Approx(report.mean_bytes * static_cast<double>(users)));
    }
  }
}

TEST_CASE("store-backed report matches the catalog") {
  auto dir = fresh_dir("report");
  AdapterStore store(dir);
  LoraAdapter a = make_adapter("a", 1);
  LoraAdapter b = make_adapter("b", 2, 8);
  store.save_adapter(a);
  store.save_adapter(b);

  std::vector<uint64_t> counts = {100};
  StorageReport report = store.storage_report(counts);
  CHECK(report.user_count == 2);
  CHECK(report.total_bytes == a.serialized_size() + b.serialized_size());
}
