#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "persona/lora.hpp"
#include "persona/retrieval.hpp"

namespace persona {

// Decode settings shared by every backend.
struct DecodeConfig {
  int beam_width = 4;
  int max_input_tokens = 512;
  int max_output_tokens = 128;
  bool deterministic = true;
  double length_norm_exponent = 1.0;

  void validate() const;
};

struct GenerationResult {
  std::string text;
  int token_count = 0;
  std::string backend;
  double latency_ms = 0.0;
};

// Anything that can score the next decoder token given what has been
// emitted so far. The toy model and hand-built test distributions both
// implement this, so beam search is checkable against enumeration.
class Seq2SeqScorer {
 public:
  virtual ~Seq2SeqScorer() = default;
  virtual int vocab_size() const = 0;
  virtual int eos_id() const = 0;
  virtual VectorXd next_log_probs(std::span<const int> emitted) const = 0;
};

// Length-normalized beam search: hypotheses are pruned by cumulative
// log-probability, completed ones ranked by cum / length^exponent with the
// EOS step included in both. Ties break toward the lexicographically
// smaller token sequence, so beam_width = 1 is exactly greedy decoding.
// The returned sequence excludes EOS.
std::vector<int> beam_decode(const Seq2SeqScorer& scorer, const DecodeConfig& cfg);

// Scorer view of an adapted toy model bound to one encoded prompt.
class ToyScorer final : public Seq2SeqScorer {
 public:
  ToyScorer(const AdaptedModel& model, std::span<const int> enc_ids);
  int vocab_size() const override;
  int eos_id() const override { return WordTokenizer::kEos; }
  VectorXd next_log_probs(std::span<const int> emitted) const override;

 private:
  const AdaptedModel* model_;
  MatrixXd memory_;
};

// Deterministic scripted backend: longest matching key prefix wins; the
// mandatory "*" entry answers everything else.
class MockScript {
 public:
  static MockScript from_json(std::string_view json_text);
  static MockScript from_file(const std::string& path);
  explicit MockScript(std::map<std::string, std::string> responses);

  const std::string& respond(std::string_view prompt) const;

 private:
  std::map<std::string, std::string> responses_;
};

struct RemoteConfig {
  std::string endpoint;  // falls back to $PERSONA_LLM_ENDPOINT
  std::string model_name = "default";
  int max_attempts = 3;
  double backoff_base_seconds = 0.5;
  double timeout_seconds = 10.0;
  int max_inflight = 8;
};

// The language model boundary of the engine. Handles are immutable and
// shareable; generation never mutates the prompt beyond head-preserving
// truncation to max_input_tokens.
class ModelHandle {
 public:
  static ModelHandle mock(MockScript script);
  static ModelHandle remote(RemoteConfig cfg);
  static ModelHandle toy(std::shared_ptr<const ToyModel> base,
                         std::optional<LoraAdapter> adapter = std::nullopt);

  GenerationResult generate(std::string_view prompt, const DecodeConfig& cfg) const;

  std::string_view backend_name() const;
  bool personalized() const;

 private:
  ModelHandle() = default;

  enum class Backend { Mock, Remote, Toy };
  Backend backend_ = Backend::Mock;
  std::optional<MockScript> mock_;
  std::optional<RemoteConfig> remote_;
  std::shared_ptr<const ToyModel> toy_base_;
  std::optional<LoraAdapter> adapter_;
  std::shared_ptr<const AdaptedModel> toy_model_;  // built once, reused
};

// Remote generation speaking the engine's HTTP contract:
//   POST /generate {"model","prompt","max_tokens","beam"} -> {"text": ...}
//   POST /embed    {"model","text"} -> {"embedding": [...]}
// Retries wrap 5xx and transport failures with exponential backoff.
GenerationResult remote_generate(const RemoteConfig& cfg, std::string_view prompt,
                                 const DecodeConfig& decode);
std::vector<double> remote_embed(const RemoteConfig& cfg, std::string_view text);

// EmbeddingProvider backed by the remote /embed route.
class RemoteEmbedder final : public EmbeddingProvider {
 public:
  RemoteEmbedder(RemoteConfig cfg, size_t dimension)
      : cfg_(std::move(cfg)), dimension_(dimension) {}
  size_t dimension() const override { return dimension_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  RemoteConfig cfg_;
  size_t dimension_;
};

inline constexpr const char* kEndpointEnvVar = "PERSONA_LLM_ENDPOINT";

}  // namespace persona
