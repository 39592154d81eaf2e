#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persona/metrics.hpp"
#include "persona/task.hpp"

namespace persona {

struct LatencyBreakdown {
  double retrieval_ms = 0.0;
  double adapter_load_ms = 0.0;
  double generation_ms = 0.0;
};

struct PerUserResult {
  std::string user_id;
  size_t profile_size = 0;
  std::string prediction;
  std::string gold;
  std::map<std::string, double> metrics;
  std::string mode;
  LatencyBreakdown latency;
  std::string error;  // empty on success

  bool failed() const { return !error.empty(); }
};

// Everything the run knew that affects its outputs; serialized with the
// report so results are reproducible from the file alone.
struct RunSnapshot {
  std::string task;
  std::string mode;
  std::string backend;
  std::string retriever;
  int k = 0;
  int lora_rank = 0;
  double lora_alpha = 0.0;
  int epochs = 0;
  double learning_rate = 0.0;
  int beam_width = 0;
  int max_input_tokens = 0;
  int max_output_tokens = 0;
  uint64_t seed = 0;
};

struct MetricDelta {
  std::string metric;
  double baseline = 0.0;
  double value = 0.0;
  double delta = 0.0;             // value - baseline
  double relative_percent = 0.0;  // 100 * delta / |baseline|
};

struct EvalReport {
  RunSnapshot config;
  std::vector<MetricValue> aggregates;
  std::vector<PerUserResult> users;  // dataset order
  std::string baseline_name;         // set when deltas were computed
  std::vector<MetricDelta> deltas;

  // Wall-clock latencies are excluded unless include_timings is set, so a
  // fixed-seed run serializes byte-identically across repetitions.
  std::string to_json(bool include_timings = false) const;
  static EvalReport from_json(std::string_view json_text);

  std::string to_csv() const;
  std::string to_markdown() const;

  // Recomputes aggregate metrics from the per-user rows (predictions and
  // golds), for the consistency check and for deltas on loaded reports.
  std::vector<MetricValue> recompute_aggregates(TaskId task) const;

  const MetricValue* find_aggregate(std::string_view name) const;
  const PerUserResult* find_user(std::string_view user_id) const;
};

// Computes deltas of `report` against `baseline` over shared metrics and
// stores them in the report.
void attach_baseline_deltas(EvalReport& report, const EvalReport& baseline,
                            std::string baseline_name);

enum class ReportFormat { Json, Csv, Markdown };

ReportFormat parse_report_format(std::string_view name);

// Writes the report into `directory` as report.<ext>; returns the path.
std::string emit_report(const EvalReport& report, ReportFormat format,
                        const std::string& directory, bool include_timings = false);

// Task -> aggregate metrics, per the benchmark's evaluation protocol.
std::vector<MetricValue> compute_task_aggregates(
    TaskId task, std::span<const std::string> preds,
    std::span<const std::string> golds);

// The metric driving improvement indicators for a task.
std::string primary_metric_for(TaskId task);

}  // namespace persona
