#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "persona/lora.hpp"

namespace persona {

// Per-user adapter training recipe. Batch size is effective: sequences are
// accumulated in micro-batches of at most `micro_batch_size` before each
// optimizer step.
struct TrainConfig {
  int epochs = 50;
  double learning_rate = 5e-4;
  double warmup_fraction = 0.05;  // linear warmup, then linear decay
  double weight_decay = 1e-4;     // decoupled, applied to A/B only
  int batch_size = 16;
  int micro_batch_size = 4;
  uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct TrainResult {
  LoraAdapter adapter;
  std::vector<double> epoch_mean_loss;  // token-mean loss per epoch
  int optimizer_steps = 0;
};

// Learning rate at 0-based step `step` of `total_steps`. Warmup covers
// ceil(warmup_fraction * total_steps) steps.
double scheduled_learning_rate(const TrainConfig& cfg, int step, int total_steps);

// Trains A/B on the user's converted pairs with bias-corrected adaptive
// moments and decoupled weight decay; the base stays frozen. Deterministic
// for a fixed seed. Throws on empty pairs and on non-finite loss.
TrainResult train_user_adapter(const ToyModel& base,
                               std::span<const TrainingPair> pairs,
                               const LoraConfig& lora, const TrainConfig& train,
                               std::string user_id);

}  // namespace persona
