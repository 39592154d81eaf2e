#include "persona/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "persona/convert.hpp"
#include "persona/errors.hpp"
#include "persona/privacy.hpp"
#include "persona/prompting.hpp"

namespace persona {

namespace {

constexpr uint64_t kConvertStream = 0xC04E5645;
constexpr uint64_t kBaseStream = 0xBA5E;
constexpr uint64_t kTrainStream = 0x7EA14;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

RunMode parse_mode(std::string_view name) {
  if (name == "none") return RunMode::None;
  if (name == "rag") return RunMode::Rag;
  if (name == "peft") return RunMode::Peft;
  if (name == "peft-rag" || name == "peft_rag" || name == "peftrag") {
    return RunMode::PeftRag;
  }
  throw ConfigError("unknown mode: " + std::string(name));
}

std::string_view mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::None: return "none";
    case RunMode::Rag: return "rag";
    case RunMode::Peft: return "peft";
    case RunMode::PeftRag: return "peft-rag";
  }
  return "?";
}

BackendKind parse_backend(std::string_view name) {
  if (name == "mock") return BackendKind::Mock;
  if (name == "remote") return BackendKind::Remote;
  if (name == "toy") return BackendKind::Toy;
  throw ConfigError("unknown backend: " + std::string(name));
}

std::string_view backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Mock: return "mock";
    case BackendKind::Remote: return "remote";
    case BackendKind::Toy: return "toy";
  }
  return "?";
}

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  decode.validate();
  bool needs_training = mode == RunMode::Peft || mode == RunMode::PeftRag;
  if (needs_training && backend != BackendKind::Toy && store_dir.empty()) {
    throw ConfigError(
        "peft modes need a trainable backend (toy) or a pre-populated adapter "
        "store");
  }
  // The adapter file format carries rank and alpha only; a run whose
  // adapters bypass the alpha/rank scaling would not survive a store
  // roundtrip unchanged.
  if (needs_training && !lora.use_alpha_scaling) {
    throw ConfigError(
        "peft runs require alpha/rank scaling (the literal-update switch is a "
        "library-level option not representable in stored adapters)");
  }
}

namespace {

bool uses_retrieval(RunMode mode) {
  return mode == RunMode::Rag || mode == RunMode::PeftRag;
}

bool uses_adapters(RunMode mode) {
  return mode == RunMode::Peft || mode == RunMode::PeftRag;
}

struct SharedResources {
  std::optional<ModelHandle> mock_handle;
  std::optional<ModelHandle> remote_handle;
  std::unique_ptr<AdapterStore> store;
  HashEmbedder embedder{64};
};

std::vector<RankedEntry> to_ranked_entries(const RankedList& ranked,
                                           std::span<const ProfileEntry> profile) {
  std::vector<RankedEntry> out;
  out.reserve(ranked.entries.size());
  for (const auto& scored : ranked.entries) {
    out.push_back({scored.index, &profile[static_cast<size_t>(scored.index)]});
  }
  return out;
}

RankedList run_retriever(const RunConfig& cfg, const SharedResources& shared,
                         const UserRecord& record, RetrieverKind kind,
                         const std::string& query) {
  switch (kind) {
    case RetrieverKind::BM25: {
      ProfileIndex index = build_index(record.profile, cfg.task, record.user_id);
      return retrieve_bm25(index, query, cfg.k);
    }
    case RetrieverKind::Recency:
      return retrieve_recency(record.profile, cfg.k, record.user_id);
    case RetrieverKind::Embedding:
      return retrieve_embedding(shared.embedder, record.profile, cfg.task, query,
                                cfg.k, record.user_id);
    case RetrieverKind::Selected:
      throw ConfigError("selection must be resolved before dispatch");
  }
  throw ConfigError("unknown retriever kind");
}

std::string assemble_prompt(const RunConfig& cfg, const SharedResources& shared,
                            const UserRecord& record) {
  // An empty profile retrieves nothing, so rag degrades to the bare input.
  if (!uses_retrieval(cfg.mode) || record.profile.empty()) {
    return record.input;
  }
  std::string query = make_query(cfg.task, record.input);

  RetrieverKind kind = cfg.retriever;
  if (kind == RetrieverKind::Selected) {
    std::vector<RetrieverKind> candidates = {
        RetrieverKind::BM25, RetrieverKind::Recency, RetrieverKind::Embedding};
    kind = select_retriever(cfg.selection, record, candidates);
  }
  RankedList ranked = run_retriever(cfg, shared, record, kind, query);
  auto entries = to_ranked_entries(ranked, record.profile);
  PersonalizedPrompt prompt =
      aggregate_prompt(cfg.task, record.input, entries,
                       static_cast<size_t>(cfg.decode.max_input_tokens));
  return prompt.text;
}

// Converted pairs and the word tokenizer are needed for every toy-backend
// mode: the per-user vocabulary defines the per-user base model.
struct UserModelBundle {
  std::shared_ptr<const ToyModel> base;
  Fingerprint fingerprint{};
  std::vector<TrainingPair> pairs;
};

UserModelBundle build_user_base(const RunConfig& cfg, const UserRecord& record) {
  UserModelBundle bundle;
  if (!record.profile.empty()) {
    Rng convert_rng(derive_seed(cfg.seed, record.user_id, kConvertStream));
    try {
      TrainingSet set =
          build_user_training_set(cfg.task, record.profile, convert_rng);
      bundle.pairs = std::move(set.pairs);
    } catch (const DataError&) {
      bundle.pairs.clear();  // all-degenerate profile; model still serves
    }
  }
  WordTokenizer tokenizer = WordTokenizer::build(bundle.pairs);
  ToyModel model = ToyModel::create(
      cfg.toy, std::move(tokenizer),
      derive_seed(cfg.seed, record.user_id, kBaseStream));
  model.owner = record.user_id;
  auto shared_model = std::make_shared<ToyModel>(std::move(model));
  bundle.fingerprint = shared_model->fingerprint();
  bundle.base = std::move(shared_model);
  return bundle;
}

LoraAdapter obtain_adapter(const RunConfig& cfg, SharedResources& shared,
                           const UserRecord& record, const UserModelBundle& bundle) {
  if (shared.store) {
    auto existing = shared.store->lookup(record.user_id);
    if (existing && existing->base_fingerprint == bundle.fingerprint &&
        existing->rank == static_cast<uint32_t>(cfg.lora.rank) &&
        existing->alpha == static_cast<float>(cfg.lora.alpha)) {
      return shared.store->load_adapter(record.user_id, bundle.fingerprint);
    }
  }
  if (bundle.pairs.empty()) {
    throw DataError("user " + record.user_id + " has no trainable profile pairs");
  }
  TrainConfig train = cfg.train;
  train.seed = derive_seed(cfg.seed, record.user_id, kTrainStream);
  TrainResult trained =
      train_user_adapter(*bundle.base, bundle.pairs, cfg.lora, train, record.user_id);
  if (shared.store) {
    shared.store->save_adapter(trained.adapter, /*overwrite=*/true);
  }
  return std::move(trained.adapter);
}

PerUserResult process_user(const RunConfig& cfg, SharedResources& shared,
                           const UserRecord& record) {
  privacy::AccessScope scope(record.user_id);

  PerUserResult result;
  result.user_id = record.user_id;
  result.profile_size = record.profile.size();
  result.mode = std::string(mode_name(cfg.mode));

  auto retrieval_start = Clock::now();
  std::string prompt = assemble_prompt(cfg, shared, record);
  result.latency.retrieval_ms = uses_retrieval(cfg.mode) ? ms_since(retrieval_start) : 0.0;

  ModelHandle handle = [&]() -> ModelHandle {
    switch (cfg.backend) {
      case BackendKind::Mock: return *shared.mock_handle;
      case BackendKind::Remote: return *shared.remote_handle;
      case BackendKind::Toy: {
        UserModelBundle bundle = build_user_base(cfg, record);
        if (uses_adapters(cfg.mode)) {
          auto load_start = Clock::now();
          LoraAdapter adapter = obtain_adapter(cfg, shared, record, bundle);
          result.latency.adapter_load_ms = ms_since(load_start);
          return ModelHandle::toy(bundle.base, std::move(adapter));
        }
        return ModelHandle::toy(bundle.base);
      }
    }
    throw ConfigError("unknown backend");
  }();

  GenerationResult generation = handle.generate(prompt, cfg.decode);
  result.latency.generation_ms = generation.latency_ms;
  result.prediction = std::move(generation.text);
  result.gold = record.gold;

  // Single-pair metric values; aggregates recompute over all users.
  std::vector<std::string> pred{result.prediction};
  std::vector<std::string> gold{result.gold};
  switch (task_kind(cfg.task)) {
    case TaskKind::BinaryClassification:
    case TaskKind::CategoricalClassification15:
      result.metrics["accuracy"] = accuracy(pred, gold).value;
      break;
    case TaskKind::Ordinal1To5: {
      double d = parse_rating(result.prediction) - parse_rating(result.gold);
      result.metrics["mae"] = std::abs(d);
      result.metrics["rmse"] = std::abs(d);
      break;
    }
    case TaskKind::Generation:
      result.metrics["rouge1"] =
          rouge(result.prediction, result.gold, RougeVariant::Rouge1).value;
      result.metrics["rougeL"] =
          rouge(result.prediction, result.gold, RougeVariant::RougeL).value;
      break;
  }
  return result;
}

RunSnapshot snapshot_config(const RunConfig& cfg) {
  RunSnapshot snap;
  snap.task = std::string(task_name(cfg.task));
  snap.mode = std::string(mode_name(cfg.mode));
  snap.backend = std::string(backend_kind_name(cfg.backend));
  snap.retriever = std::string(retriever_name(cfg.retriever));
  snap.k = cfg.k;
  snap.lora_rank = cfg.lora.rank;
  snap.lora_alpha = cfg.lora.alpha;
  snap.epochs = cfg.train.epochs;
  snap.learning_rate = cfg.train.learning_rate;
  snap.beam_width = cfg.decode.beam_width;
  snap.max_input_tokens = cfg.decode.max_input_tokens;
  snap.max_output_tokens = cfg.decode.max_output_tokens;
  snap.seed = cfg.seed;
  return snap;
}

}  // namespace

std::string build_prompt_for_user(const RunConfig& cfg, const UserRecord& record) {
  SharedResources shared;
  shared.embedder = HashEmbedder(cfg.embed_dimension);
  return assemble_prompt(cfg, shared, record);
}

EvalReport run_task(const RunConfig& cfg, const Dataset& dataset) {
  cfg.validate();
  if (dataset.task != cfg.task) {
    throw ConfigError("dataset task does not match the run configuration");
  }
  for (const auto& record : dataset.records) {
    if (record.gold.empty()) {
      throw DataError("record " + record.user_id +
                      " has no gold output; join a golds file first");
    }
  }

  SharedResources shared;
  shared.embedder = HashEmbedder(cfg.embed_dimension);
  if (cfg.backend == BackendKind::Mock) {
    if (cfg.mock_script_path.empty()) {
      throw ConfigError("mock backend needs --mock-script");
    }
    shared.mock_handle = ModelHandle::mock(MockScript::from_file(cfg.mock_script_path));
  }
  if (cfg.backend == BackendKind::Remote) {
    shared.remote_handle = ModelHandle::remote(cfg.remote);
  }
  if (!cfg.store_dir.empty()) {
    shared.store = std::make_unique<AdapterStore>(cfg.store_dir);
  }

  const size_t n = dataset.records.size();
  std::vector<PerUserResult> results(n);
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) break;
      const UserRecord& record = dataset.records[i];
      try {
        results[i] = process_user(cfg, shared, record);
      } catch (const std::exception& e) {
        PerUserResult failure;
        failure.user_id = record.user_id;
        failure.profile_size = record.profile.size();
        failure.mode = std::string(mode_name(cfg.mode));
        failure.error = e.what();
        results[i] = std::move(failure);
      }
    }
  };

  int thread_count = std::min<int>(cfg.workers, static_cast<int>(n));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  size_t failures = 0;
  for (const auto& r : results) {
    if (r.failed()) ++failures;
  }
  if (n > 0 &&
      static_cast<double>(failures) > cfg.max_error_fraction * static_cast<double>(n)) {
    std::string detail;
    for (const auto& r : results) {
      if (r.failed()) {
        detail = r.error;
        break;
      }
    }
    throw DataError(std::to_string(failures) + "/" + std::to_string(n) +
                    " users failed (first error: " + detail + ")");
  }

  EvalReport report;
  report.config = snapshot_config(cfg);
  report.users = std::move(results);
  report.aggregates = report.recompute_aggregates(cfg.task);
  return report;
}

EvalReport run_task(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.dataset_path.empty()) throw ConfigError("no dataset path configured");
  Dataset dataset = load_dataset(cfg.dataset_path, cfg.task);
  if (cfg.golds_path.empty()) throw ConfigError("no golds path configured");
  auto golds = load_gold_outputs(cfg.golds_path);
  join_golds(dataset, golds);
  return run_task(cfg, dataset);
}

}  // namespace persona
