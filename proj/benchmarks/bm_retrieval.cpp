#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "persona/retrieval.hpp"
#include "persona/rng.hpp"

using namespace persona;

namespace {

std::vector<ProfileEntry> synthetic_profile(size_t entries, size_t tokens_each,
                                            uint64_t seed) {
  Rng gen(seed);
  std::vector<ProfileEntry> profile;
  profile.reserve(entries);
  for (size_t i = 0; i < entries; ++i) {
    std::string text;
    for (size_t t = 0; t < tokens_each; ++t) {
      if (t) text += " ";
      text += "w" + std::to_string(gen.uniform_int(500));
    }
    ProfileEntry e;
    e.entry_id = "p" + std::to_string(i);
    e.fields = {{"text", std::move(text)}};
    profile.push_back(std::move(e));
  }
  return profile;
}

}  // namespace

static void BM_BuildIndex(benchmark::State& state) {
  auto profile = synthetic_profile(static_cast<size_t>(state.range(0)), 40, 1);
  for (auto _ : state) {
    ProfileIndex index = build_index(profile, TaskId::LaMP7);
    benchmark::DoNotOptimize(index);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildIndex)->Range(50, 400)->Complexity();

static void BM_RetrieveBm25(benchmark::State& state) {
  auto profile = synthetic_profile(static_cast<size_t>(state.range(0)), 40, 1);
  ProfileIndex index = build_index(profile, TaskId::LaMP7);
  std::string query = "w1 w42 w88 w250 w499";
  for (auto _ : state) {
    RankedList ranked = retrieve_bm25(index, query, 4);
    benchmark::DoNotOptimize(ranked);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RetrieveBm25)->Range(50, 400)->Complexity();

static void BM_RetrieveEmbedding(benchmark::State& state) {
  auto profile = synthetic_profile(static_cast<size_t>(state.range(0)), 40, 1);
  HashEmbedder embedder(64);
  std::string query = "w1 w42 w88 w250 w499";
  for (auto _ : state) {
    RankedList ranked =
        retrieve_embedding(embedder, profile, TaskId::LaMP7, query, 4);
    benchmark::DoNotOptimize(ranked);
  }
}
BENCHMARK(BM_RetrieveEmbedding)->Range(50, 400);

static void BM_RetrieveRecency(benchmark::State& state) {
  auto profile = synthetic_profile(static_cast<size_t>(state.range(0)), 40, 1);
  for (size_t i = 0; i < profile.size(); i += 2) {
    profile[i].date = parse_timestamp("2021-06-01");
  }
  for (auto _ : state) {
    RankedList ranked = retrieve_recency(profile, 4);
    benchmark::DoNotOptimize(ranked);
  }
}
BENCHMARK(BM_RetrieveRecency)->Range(50, 400);
