#include <benchmark/benchmark.h>

#include "persona/gateway.hpp"
#include "persona/train.hpp"

using namespace persona;

namespace {

std::vector<TrainingPair> bench_pairs(int count) {
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < count; ++i) {
    pairs.push_back({"Generate a headline for the following article: the "
                     "council approves the budget this week",
                     "council approves budget", "p" + std::to_string(i)});
  }
  return pairs;
}

ToyModel bench_model(int d_model, std::span<const TrainingPair> pairs) {
  ToyModelConfig cfg;
  cfg.d_model = d_model;
  cfg.num_heads = 4;
  cfg.ff_dim = 2 * d_model;
  cfg.encoder_layers = 2;
  cfg.decoder_layers = 2;
  cfg.max_input_len = 32;
  cfg.max_output_len = 8;
  return ToyModel::create(cfg, WordTokenizer::build(pairs), 5);
}

}  // namespace

static void BM_ToyForward(benchmark::State& state) {
  auto pairs = bench_pairs(4);
  ToyModel base = bench_model(static_cast<int>(state.range(0)), pairs);
  AdaptedModel model(base);
  auto encoded = encode_pairs(base, pairs);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.batch_loss(encoded));
  }
}
BENCHMARK(BM_ToyForward)->Arg(32)->Arg(64)->Arg(128);

static void BM_TrainEpoch(benchmark::State& state) {
  auto pairs = bench_pairs(16);
  ToyModel base = bench_model(64, pairs);
  LoraConfig lora;
  lora.rank = static_cast<int>(state.range(0));
  TrainConfig train;
  train.epochs = 1;
  train.seed = 2;
  for (auto _ : state) {
    TrainResult result = train_user_adapter(base, pairs, lora, train, "bench");
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_BeamDecode(benchmark::State& state) {
  auto pairs = bench_pairs(4);
  ToyModel base = bench_model(64, pairs);
  AdaptedModel model(base);
  std::vector<int> enc_ids = base.encode_input(pairs[0].input);
  ToyScorer scorer(model, enc_ids);
  DecodeConfig cfg;
  cfg.beam_width = static_cast<int>(state.range(0));
  cfg.max_output_tokens = 8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(beam_decode(scorer, cfg));
  }
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(4)->Arg(8);
