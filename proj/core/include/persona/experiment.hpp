#pragma once

#include <memory>
#include <optional>
#include <string>

#include "persona/adapter_store.hpp"
#include "persona/analysis.hpp"
#include "persona/dataset.hpp"
#include "persona/gateway.hpp"
#include "persona/report.hpp"
#include "persona/retrieval.hpp"
#include "persona/train.hpp"

namespace persona {

enum class RunMode { None, Rag, Peft, PeftRag };

RunMode parse_mode(std::string_view name);
std::string_view mode_name(RunMode mode);

enum class BackendKind { Mock, Remote, Toy };

BackendKind parse_backend(std::string_view name);
std::string_view backend_kind_name(BackendKind kind);

// One end-to-end evaluation run: task, personalization mode, retrieval and
// training settings, backend, and paths.
struct RunConfig {
  TaskId task = TaskId::LaMP2;
  RunMode mode = RunMode::Rag;
  RetrieverKind retriever = RetrieverKind::BM25;
  SelectionPolicy selection;  // governs retriever == Selected
  int k = 4;

  LoraConfig lora;
  TrainConfig train;
  DecodeConfig decode;
  ToyModelConfig toy;

  BackendKind backend = BackendKind::Mock;
  RemoteConfig remote;
  std::string mock_script_path;
  size_t embed_dimension = 64;

  uint64_t seed = 0;
  int workers = 1;

  std::string dataset_path;
  std::string golds_path;
  std::string store_dir;   // empty disables the adapter store
  std::string out_dir;

  // Fraction of per-user failures tolerated before the run itself fails.
  double max_error_fraction = 0.10;

  void validate() const;
};

// Loads dataset and golds from the configured paths, joins them, runs.
EvalReport run_task(const RunConfig& cfg);

// Runs over an already-joined in-memory dataset (gold outputs present).
EvalReport run_task(const RunConfig& cfg, const Dataset& dataset);

// Builds the per-user prompt for one record under `cfg` (mode rag/peft_rag
// retrieval + aggregation; bare input otherwise). Exposed for tests.
std::string build_prompt_for_user(const RunConfig& cfg, const UserRecord& record);

}  // namespace persona
