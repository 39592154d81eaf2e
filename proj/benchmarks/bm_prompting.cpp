#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "persona/metrics.hpp"
#include "persona/prompting.hpp"
#include "persona/rng.hpp"

using namespace persona;

namespace {

std::vector<ProfileEntry> headline_entries(size_t count, size_t body_tokens,
                                           uint64_t seed) {
  Rng gen(seed);
  std::vector<ProfileEntry> out;
  for (size_t i = 0; i < count; ++i) {
    std::string body;
    for (size_t t = 0; t < body_tokens; ++t) {
      if (t) body += " ";
      body += "w" + std::to_string(gen.uniform_int(300));
    }
    ProfileEntry e;
    e.entry_id = "p" + std::to_string(i);
    e.fields = {{"text", std::move(body)}, {"title", "headline " + std::to_string(i)}};
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

static void BM_AggregatePromptWithinBudget(benchmark::State& state) {
  auto entries = headline_entries(4, static_cast<size_t>(state.range(0)), 3);
  std::vector<RankedEntry> ranked;
  for (size_t i = 0; i < entries.size(); ++i) {
    ranked.push_back({static_cast<int>(i), &entries[i]});
  }
  std::string input = "Generate a headline for the following article: body text";
  for (auto _ : state) {
    PersonalizedPrompt prompt = aggregate_prompt(TaskId::LaMP4, input, ranked, 512);
    benchmark::DoNotOptimize(prompt);
  }
}
BENCHMARK(BM_AggregatePromptWithinBudget)->Arg(50)->Arg(200)->Arg(1000);

static void BM_Rouge(benchmark::State& state) {
  Rng gen(9);
  std::string pred, gold;
  for (int t = 0; t < state.range(0); ++t) {
    if (t) {
      pred += " ";
      gold += " ";
    }
    pred += "w" + std::to_string(gen.uniform_int(50));
    gold += "w" + std::to_string(gen.uniform_int(50));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(rouge(pred, gold, RougeVariant::Rouge1));
    benchmark::DoNotOptimize(rouge(pred, gold, RougeVariant::RougeL));
  }
}
BENCHMARK(BM_Rouge)->Arg(10)->Arg(50)->Arg(200);
