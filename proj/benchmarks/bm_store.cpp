#include <benchmark/benchmark.h>

#include <filesystem>

#include "persona/adapter_store.hpp"
#include "persona/lora.hpp"

using namespace persona;

namespace {

LoraAdapter bench_adapter(const std::string& user, int rank) {
  ToyModelConfig cfg;
  cfg.d_model = 64;
  cfg.num_heads = 4;
  cfg.ff_dim = 128;
  cfg.encoder_layers = 2;
  cfg.decoder_layers = 2;
  WordTokenizer tok = WordTokenizer::from_words({"a", "b", "c"});
  ToyModel base = ToyModel::create(cfg, tok, 7);
  LoraConfig lora;
  lora.rank = rank;
  AdaptedModel model(base, lora, 8);
  return model.export_adapter(user);
}

std::filesystem::path bench_dir() {
  auto dir = std::filesystem::temp_directory_path() / "persona_bench_store";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

static void BM_AdapterSerialize(benchmark::State& state) {
  LoraAdapter adapter = bench_adapter("u", static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adapter.serialize());
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(adapter.serialized_size()));
}
BENCHMARK(BM_AdapterSerialize)->Arg(4)->Arg(8)->Arg(32);

static void BM_StoreSaveLoad(benchmark::State& state) {
  auto dir = bench_dir();
  AdapterStore store(dir, /*cache_capacity=*/0);  // force file reads
  LoraAdapter adapter = bench_adapter("u", 8);
  store.save_adapter(adapter);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.load_adapter("u"));
  }
}
BENCHMARK(BM_StoreSaveLoad);

static void BM_StoreCachedLoad(benchmark::State& state) {
  auto dir = bench_dir();
  AdapterStore store(dir, /*cache_capacity=*/64);
  LoraAdapter adapter = bench_adapter("u", 8);
  store.save_adapter(adapter);
  store.load_adapter("u");  // warm
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.load_adapter("u"));
  }
}
BENCHMARK(BM_StoreCachedLoad);
