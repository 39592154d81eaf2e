#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "persona/adapter.hpp"
#include "persona/rng.hpp"
#include "persona/toy_model.hpp"

namespace persona {

// Trainable low-rank pair in fp64 (training precision). The serialized
// artifact snaps to f32; loading upcasts exactly.
struct LoraPair {
  MatrixXd a;  // d x r
  MatrixXd b;  // r x k
};

// One tokenized training pair. `target_ids` ends with EOS.
struct EncodedPair {
  std::vector<int> input_ids;
  std::vector<int> target_ids;
};

// W = W0 + scaling * A*B, where scaling is alpha/r (or 1 with the scaling
// switch off).
MatrixXd merge_weights(const MatrixXd& w0, const MatrixXd& a, const MatrixXd& b,
                       double alpha, int rank, bool use_alpha_scaling = true);

// Frozen base plus trainable adapters on attention projections. The base
// path of an adapted projection computes exactly what the bare model
// computes, so a fresh (B = 0) adapter is a bitwise identity.
class AdaptedModel {
 public:
  explicit AdaptedModel(const ToyModel& base);
  AdaptedModel(const ToyModel& base, const LoraConfig& cfg, uint64_t seed);
  AdaptedModel(const ToyModel& base, const LoraAdapter& artifact);

  const ToyModel& base() const { return *base_; }
  const LoraConfig& config() const { return config_; }
  bool has_adapters() const { return !adapters_.empty(); }
  std::map<std::string, LoraPair>& adapters() { return adapters_; }
  const std::map<std::string, LoraPair>& adapters() const { return adapters_; }

  // Sum of r*(d+k) over adapted projections; 0 without adapters.
  size_t trainable_param_count() const;

  // f32 artifact snapshot. The in-memory matrices are snapped to f32 as
  // well so that artifact, model and any later reload agree bitwise.
  LoraAdapter export_adapter(std::string user_id);

  // --- eval-mode forwards (no dropout) ---

  // Encoder memory for a prompt (n x d_model).
  MatrixXd encode(std::span<const int> enc_ids) const;

  // Teacher-forced decoder logits, one row per position of dec_input_ids.
  MatrixXd decoder_logits(const MatrixXd& memory,
                          std::span<const int> dec_input_ids) const;

  // Log-softmax over the vocabulary for the token following `emitted`.
  VectorXd next_token_log_probs(const MatrixXd& memory,
                                std::span<const int> emitted) const;

  // Mean cross-entropy over target tokens of `pairs`, eval mode.
  double batch_loss(std::span<const EncodedPair> pairs) const;

  struct BackwardResult {
    double loss_sum = 0.0;
    size_t tokens = 0;
  };

  // Forward + backward over `pairs`. Gradients of the summed token loss are
  // accumulated into `grads` (allocate with zero_gradients()). Dropout on
  // the adapter input path is applied when `dropout_rng` is non-null and
  // config().dropout > 0.
  BackwardResult accumulate_gradients(std::span<const EncodedPair> pairs,
                                      std::map<std::string, LoraPair>& grads,
                                      Rng* dropout_rng) const;

  std::map<std::string, LoraPair> zero_gradients() const;

 private:
  const ToyModel* base_;
  LoraConfig config_;
  std::map<std::string, LoraPair> adapters_;
};

// Spec-level name for adapter injection.
AdaptedModel attach_adapters(const ToyModel& base, const LoraConfig& cfg,
                             uint64_t seed);

// Copy of the base with every adapted projection replaced by its merged
// weight. Forward passes through the result match adapter-form passes to
// float-associativity error.
ToyModel merge_into_base(const AdaptedModel& model);

// Tokenizes training pairs with the base model's word tokenizer.
std::vector<EncodedPair> encode_pairs(const ToyModel& base,
                                      std::span<const TrainingPair> pairs);

}  // namespace persona
