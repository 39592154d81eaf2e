// persona: privacy-preserving LLM personalization engine CLI.
//
// Subcommands:
//   run      evaluate one (task, mode, retriever, backend) configuration
//   analyze  profile-size vs improvement correlation between two reports
//   store    adapter store utilities (stats)

#include "persona/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "persona/errors.hpp"

namespace {

using namespace persona;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunFlags {
  std::string task = "lamp2";
  std::string mode = "rag";
  std::string retriever = "bm25";
  std::string backend = "mock";
  std::string data_path;
  std::string golds_path;
  std::string store_dir;
  std::string out_dir = "reports";
  std::string mock_script;
  std::string endpoint;
  std::string compare_path;
  std::vector<std::string> formats = {"json"};
  int k = 4;
  int rank = 8;
  double alpha = 32.0;
  double dropout = 0.1;
  int epochs = 50;
  double lr = 5e-4;
  double warmup = 0.05;
  double weight_decay = 1e-4;
  int batch = 16;
  int beam = 4;
  int max_in = 512;
  int max_out = 128;
  uint64_t seed = 0;
  int workers = 1;
  size_t select_threshold = 50;
  size_t embed_dim = 64;
  int toy_d_model = 64;
  int toy_heads = 4;
  int toy_ff = 128;
  int toy_layers = 2;
  bool with_timings = false;
};

int do_run(const RunFlags& flags) {
  RunConfig cfg;
  cfg.task = parse_task(flags.task);
  cfg.mode = parse_mode(flags.mode);
  cfg.retriever = parse_retriever(flags.retriever);
  cfg.backend = parse_backend(flags.backend);
  cfg.k = flags.k;
  cfg.lora.rank = flags.rank;
  cfg.lora.alpha = flags.alpha;
  cfg.lora.dropout = flags.dropout;
  cfg.train.epochs = flags.epochs;
  cfg.train.learning_rate = flags.lr;
  cfg.train.warmup_fraction = flags.warmup;
  cfg.train.weight_decay = flags.weight_decay;
  cfg.train.batch_size = flags.batch;
  cfg.decode.beam_width = flags.beam;
  cfg.decode.max_input_tokens = flags.max_in;
  cfg.decode.max_output_tokens = flags.max_out;
  cfg.toy.d_model = flags.toy_d_model;
  cfg.toy.num_heads = flags.toy_heads;
  cfg.toy.ff_dim = flags.toy_ff;
  cfg.toy.encoder_layers = flags.toy_layers;
  cfg.toy.decoder_layers = flags.toy_layers;
  cfg.seed = flags.seed;
  cfg.workers = flags.workers;
  cfg.selection.mode = SelectionPolicy::Mode::Heuristic;
  cfg.selection.heuristic_profile_threshold = flags.select_threshold;
  cfg.embed_dimension = flags.embed_dim;
  cfg.dataset_path = flags.data_path;
  cfg.golds_path = flags.golds_path;
  cfg.store_dir = flags.store_dir;
  cfg.out_dir = flags.out_dir;
  cfg.mock_script_path = flags.mock_script;
  cfg.remote.endpoint = flags.endpoint;

  EvalReport report = run_task(cfg);

  if (!flags.compare_path.empty()) {
    EvalReport baseline = EvalReport::from_json(read_text_file(flags.compare_path));
    attach_baseline_deltas(report, baseline, baseline.config.mode);
  }

  for (const auto& format : flags.formats) {
    std::string path = emit_report(report, parse_report_format(format),
                                   flags.out_dir, flags.with_timings);
    std::fprintf(stderr, "wrote %s\n", path.c_str());
  }

  std::printf("%s %s (%s, %s)\n", report.config.task.c_str(),
              report.config.mode.c_str(), report.config.backend.c_str(),
              report.config.retriever.c_str());
  for (const auto& metric : report.aggregates) {
    std::printf("  %-10s %.6f %s\n", metric.name.c_str(), metric.value,
                metric.direction == MetricDirection::HigherBetter ? "(higher)"
                                                                  : "(lower)");
  }
  size_t failures = 0;
  for (const auto& user : report.users) {
    if (user.failed()) ++failures;
  }
  if (failures > 0) {
    std::printf("  %zu/%zu users failed\n", failures, report.users.size());
  }
  for (const auto& delta : report.deltas) {
    std::printf("  %s vs %s: %+.3f (%+.1f%%)\n", delta.metric.c_str(),
                report.baseline_name.c_str(), delta.delta,
                delta.relative_percent);
  }
  return 0;
}

int do_analyze(const std::string& personalized_path,
               const std::string& baseline_path, const std::string& metric,
               const std::string& out_path) {
  EvalReport personalized =
      EvalReport::from_json(read_text_file(personalized_path));
  EvalReport baseline = EvalReport::from_json(read_text_file(baseline_path));
  CorrelationReport result = profile_size_analysis(personalized, baseline, metric);
  std::string json = result.to_json();
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + out_path);
    out << json;
  }
  std::printf("%s\n", json.c_str());
  return 0;
}

int do_store_stats(const std::string& store_dir,
                   const std::vector<uint64_t>& extrapolations,
                   double baseline_bytes) {
  AdapterStore store(store_dir);
  std::optional<double> baseline;
  if (baseline_bytes > 0) baseline = baseline_bytes;
  StorageReport report = store.storage_report(extrapolations, baseline);
  std::printf("%s\n", report.to_json().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persona: privacy-preserving LLM personalization engine"};
  app.require_subcommand(1);

  RunFlags flags;
  CLI::App* run_cmd =
      app.add_subcommand("run", "run one personalization configuration");
  run_cmd->add_option("--task", flags.task, "lamp1..lamp7")->capture_default_str();
  run_cmd->add_option("--mode", flags.mode, "none|rag|peft|peft-rag")
      ->capture_default_str();
  run_cmd->add_option("--retriever", flags.retriever, "bm25|recency|embed|select")
      ->capture_default_str();
  run_cmd->add_option("--backend", flags.backend, "mock|remote|toy")
      ->capture_default_str();
  run_cmd->add_option("--data", flags.data_path, "dataset JSON file")->required();
  run_cmd->add_option("--golds", flags.golds_path, "gold outputs JSON file")
      ->required();
  run_cmd->add_option("--store", flags.store_dir, "adapter store directory");
  run_cmd->add_option("--out", flags.out_dir, "report output directory")
      ->capture_default_str();
  run_cmd->add_option("--mock-script", flags.mock_script,
                      "mock backend response script (JSON)");
  run_cmd->add_option("--endpoint", flags.endpoint,
                      "remote endpoint (default $PERSONA_LLM_ENDPOINT)");
  run_cmd->add_option("--compare", flags.compare_path,
                      "baseline report JSON for delta columns");
  run_cmd->add_option("--format", flags.formats, "json|csv|markdown (repeatable)")
      ->capture_default_str();
  run_cmd->add_option("--k", flags.k, "retrieved documents per user")
      ->capture_default_str();
  run_cmd->add_option("--rank", flags.rank, "LoRA rank r")->capture_default_str();
  run_cmd->add_option("--alpha", flags.alpha, "LoRA scaling alpha")
      ->capture_default_str();
  run_cmd->add_option("--dropout", flags.dropout, "LoRA dropout")
      ->capture_default_str();
  run_cmd->add_option("--epochs", flags.epochs, "training epochs per user")
      ->capture_default_str();
  run_cmd->add_option("--lr", flags.lr, "learning rate")->capture_default_str();
  run_cmd->add_option("--warmup", flags.warmup, "warmup fraction")
      ->capture_default_str();
  run_cmd->add_option("--weight-decay", flags.weight_decay, "decoupled weight decay")
      ->capture_default_str();
  run_cmd->add_option("--batch", flags.batch, "effective batch size")
      ->capture_default_str();
  run_cmd->add_option("--beam", flags.beam, "beam width")->capture_default_str();
  run_cmd->add_option("--max-in", flags.max_in, "max input tokens")
      ->capture_default_str();
  run_cmd->add_option("--max-out", flags.max_out, "max output tokens")
      ->capture_default_str();
  run_cmd->add_option("--seed", flags.seed, "run seed")->capture_default_str();
  run_cmd->add_option("--workers", flags.workers, "worker threads")
      ->capture_default_str();
  run_cmd->add_option("--select-threshold", flags.select_threshold,
                      "profile size above which the heuristic selector picks "
                      "recency")
      ->capture_default_str();
  run_cmd->add_option("--embed-dim", flags.embed_dim,
                      "hash embedder dimension")
      ->capture_default_str();
  run_cmd->add_option("--toy-d-model", flags.toy_d_model, "toy model width")
      ->capture_default_str();
  run_cmd->add_option("--toy-heads", flags.toy_heads, "toy attention heads")
      ->capture_default_str();
  run_cmd->add_option("--toy-ff", flags.toy_ff, "toy feed-forward width")
      ->capture_default_str();
  run_cmd->add_option("--toy-layers", flags.toy_layers,
                      "encoder/decoder layer count")
      ->capture_default_str();
  run_cmd->add_flag("--with-timings", flags.with_timings,
                    "include wall-clock latencies in the JSON report");

  std::string personalized_path, baseline_path, metric, analyze_out;
  CLI::App* analyze_cmd = app.add_subcommand(
      "analyze", "profile-size vs improvement correlation between two reports");
  analyze_cmd->add_option("--personalized", personalized_path, "report JSON")
      ->required();
  analyze_cmd->add_option("--baseline", baseline_path, "baseline report JSON")
      ->required();
  analyze_cmd->add_option("--metric", metric,
                          "metric driving the improvement sign (default: the "
                          "task's primary metric)");
  analyze_cmd->add_option("--out", analyze_out, "write the JSON here too");

  std::string stats_store;
  std::vector<uint64_t> extrapolations = {1'000'000ull};
  double baseline_bytes = 0.0;
  CLI::App* store_cmd = app.add_subcommand("store", "adapter store utilities");
  CLI::App* stats_cmd = store_cmd->add_subcommand("stats", "storage report as JSON");
  stats_cmd->add_option("--store", stats_store, "adapter store directory")
      ->required();
  stats_cmd->add_option("--extrapolate", extrapolations,
                        "hypothetical user counts")
      ->capture_default_str();
  stats_cmd->add_option("--baseline-bytes", baseline_bytes,
                        "per-user bytes of a full-model baseline for comparison");
  store_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return do_run(flags);
    if (analyze_cmd->parsed()) {
      return do_analyze(personalized_path, baseline_path, metric, analyze_out);
    }
    if (store_cmd->parsed() && stats_cmd->parsed()) {
      return do_store_stats(stats_store, extrapolations, baseline_bytes);
    }
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
