#include "persona/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persona/errors.hpp"

namespace persona {

using ordered_json = nlohmann::ordered_json;

namespace {

const char* direction_arrow(MetricDirection d) {
  return d == MetricDirection::HigherBetter ? "↑" : "↓";
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

}  // namespace

std::vector<MetricValue> compute_task_aggregates(
    TaskId task, std::span<const std::string> preds,
    std::span<const std::string> golds) {
  std::vector<MetricValue> out;
  switch (task_kind(task)) {
    case TaskKind::BinaryClassification:
      out.push_back(accuracy(preds, golds));
      break;
    case TaskKind::CategoricalClassification15:
      out.push_back(accuracy(preds, golds));
      out.push_back(macro_f1(preds, golds, lamp2_tags()));
      break;
    case TaskKind::Ordinal1To5: {
      std::vector<double> p, g;
      p.reserve(preds.size());
      g.reserve(golds.size());
      for (const auto& s : preds) p.push_back(parse_rating(s));
      for (const auto& s : golds) g.push_back(parse_rating(s));
      auto [mae, rmse] = mae_rmse(p, g);
      out.push_back(mae);
      out.push_back(rmse);
      break;
    }
    case TaskKind::Generation: {
      double r1_sum = 0.0, rl_sum = 0.0;
      for (size_t i = 0; i < preds.size(); ++i) {
        r1_sum += rouge(preds[i], golds[i], RougeVariant::Rouge1).value;
        rl_sum += rouge(preds[i], golds[i], RougeVariant::RougeL).value;
      }
      double n = static_cast<double>(preds.size());
      out.push_back({"rouge1", r1_sum / n, MetricDirection::HigherBetter});
      out.push_back({"rougeL", rl_sum / n, MetricDirection::HigherBetter});
      break;
    }
  }
  return out;
}

std::string primary_metric_for(TaskId task) {
  switch (task_kind(task)) {
    case TaskKind::BinaryClassification:
    case TaskKind::CategoricalClassification15: return "accuracy";
    case TaskKind::Ordinal1To5: return "mae";
    case TaskKind::Generation: return "rouge1";
  }
  return "accuracy";
}

const MetricValue* EvalReport::find_aggregate(std::string_view name) const {
  for (const auto& m : aggregates) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const PerUserResult* EvalReport::find_user(std::string_view user_id) const {
  for (const auto& u : users) {
    if (u.user_id == user_id) return &u;
  }
  return nullptr;
}

std::vector<MetricValue> EvalReport::recompute_aggregates(TaskId task) const {
  std::vector<std::string> preds, golds;
  for (const auto& user : users) {
    if (user.failed()) continue;
    preds.push_back(user.prediction);
    golds.push_back(user.gold);
  }
  return compute_task_aggregates(task, preds, golds);
}

std::string EvalReport::to_json(bool include_timings) const {
  ordered_json doc;
  ordered_json cfg;
  cfg["task"] = config.task;
  cfg["mode"] = config.mode;
  cfg["backend"] = config.backend;
  cfg["retriever"] = config.retriever;
  cfg["k"] = config.k;
  cfg["lora_rank"] = config.lora_rank;
  cfg["lora_alpha"] = config.lora_alpha;
  cfg["epochs"] = config.epochs;
  cfg["learning_rate"] = config.learning_rate;
  cfg["beam_width"] = config.beam_width;
  cfg["max_input_tokens"] = config.max_input_tokens;
  cfg["max_output_tokens"] = config.max_output_tokens;
  cfg["seed"] = config.seed;
  doc["config"] = std::move(cfg);

  ordered_json aggs = ordered_json::array();
  for (const auto& m : aggregates) {
    aggs.push_back({{"name", m.name},
                    {"value", m.value},
                    {"direction", m.direction == MetricDirection::HigherBetter
                                      ? "higher"
                                      : "lower"}});
  }
  doc["aggregates"] = std::move(aggs);

  ordered_json user_rows = ordered_json::array();
  for (const auto& user : users) {
    ordered_json row;
    row["user_id"] = user.user_id;
    row["profile_size"] = user.profile_size;
    row["mode"] = user.mode;
    if (user.failed()) {
      row["error"] = user.error;
    } else {
      row["prediction"] = user.prediction;
      row["gold"] = user.gold;
      ordered_json metric_map;
      for (const auto& [name, value] : user.metrics) metric_map[name] = value;
      row["metrics"] = std::move(metric_map);
    }
    if (include_timings) {
      row["latency_ms"] = {{"retrieval", user.latency.retrieval_ms},
                           {"adapter_load", user.latency.adapter_load_ms},
                           {"generation", user.latency.generation_ms}};
    }
    user_rows.push_back(std::move(row));
  }
  doc["users"] = std::move(user_rows);

  if (!baseline_name.empty()) {
    doc["baseline"] = baseline_name;
    ordered_json delta_rows = ordered_json::array();
    for (const auto& d : deltas) {
      delta_rows.push_back({{"metric", d.metric},
                            {"baseline", d.baseline},
                            {"value", d.value},
                            {"delta", d.delta},
                            {"relative_percent", d.relative_percent}});
    }
    doc["deltas"] = std::move(delta_rows);
  }
  return doc.dump(2);
}

EvalReport EvalReport::from_json(std::string_view json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  EvalReport report;
  const auto& cfg = doc.at("config");
  report.config.task = cfg.value("task", "");
  report.config.mode = cfg.value("mode", "");
  report.config.backend = cfg.value("backend", "");
  report.config.retriever = cfg.value("retriever", "");
  report.config.k = cfg.value("k", 0);
  report.config.lora_rank = cfg.value("lora_rank", 0);
  report.config.lora_alpha = cfg.value("lora_alpha", 0.0);
  report.config.epochs = cfg.value("epochs", 0);
  report.config.learning_rate = cfg.value("learning_rate", 0.0);
  report.config.beam_width = cfg.value("beam_width", 0);
  report.config.max_input_tokens = cfg.value("max_input_tokens", 0);
  report.config.max_output_tokens = cfg.value("max_output_tokens", 0);
  report.config.seed = cfg.value("seed", uint64_t{0});

  for (const auto& m : doc.at("aggregates")) {
    MetricValue value;
    value.name = m.at("name").get<std::string>();
    value.value = m.at("value").get<double>();
    value.direction = m.value("direction", "higher") == std::string("lower")
                          ? MetricDirection::LowerBetter
                          : MetricDirection::HigherBetter;
    report.aggregates.push_back(std::move(value));
  }

  for (const auto& row : doc.at("users")) {
    PerUserResult user;
    user.user_id = row.at("user_id").get<std::string>();
    user.profile_size = row.value("profile_size", size_t{0});
    user.mode = row.value("mode", "");
    if (row.contains("error")) {
      user.error = row["error"].get<std::string>();
    } else {
      user.prediction = row.value("prediction", "");
      user.gold = row.value("gold", "");
      if (row.contains("metrics")) {
        for (const auto& [name, value] : row["metrics"].items()) {
          user.metrics[name] = value.get<double>();
        }
      }
    }
    if (row.contains("latency_ms")) {
      user.latency.retrieval_ms = row["latency_ms"].value("retrieval", 0.0);
      user.latency.adapter_load_ms = row["latency_ms"].value("adapter_load", 0.0);
      user.latency.generation_ms = row["latency_ms"].value("generation", 0.0);
    }
    report.users.push_back(std::move(user));
  }

  report.baseline_name = doc.value("baseline", "");
  if (doc.contains("deltas")) {
    for (const auto& d : doc["deltas"]) {
      MetricDelta delta;
      delta.metric = d.at("metric").get<std::string>();
      delta.baseline = d.at("baseline").get<double>();
      delta.value = d.at("value").get<double>();
      delta.delta = d.at("delta").get<double>();
      delta.relative_percent = d.at("relative_percent").get<double>();
      report.deltas.push_back(std::move(delta));
    }
  }
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "user_id,profile_size,mode,prediction,gold";
  std::vector<std::string> metric_names;
  for (const auto& m : aggregates) metric_names.push_back(m.name);
  for (const auto& name : metric_names) out << "," << name;
  out << ",error\n";
  for (const auto& user : users) {
    out << csv_escape(user.user_id) << "," << user.profile_size << ","
        << user.mode << "," << csv_escape(user.prediction) << ","
        << csv_escape(user.gold);
    for (const auto& name : metric_names) {
      auto it = user.metrics.find(name);
      out << ",";
      if (it != user.metrics.end()) out << it->second;
    }
    out << "," << csv_escape(user.error) << "\n";
  }
  return out.str();
}

std::string EvalReport::to_markdown() const {
  std::ostringstream out;
  out << "# " << config.task << " / " << config.mode << "\n\n";
  bool with_baseline = !baseline_name.empty();
  out << "| Metric | " << config.mode;
  if (with_baseline) out << " | " << baseline_name << " | delta | relative";
  out << " |\n|---|---";
  if (with_baseline) out << "|---|---|---";
  out << "|\n";
  for (const auto& m : aggregates) {
    out << "| " << m.name << " " << direction_arrow(m.direction) << " | ";
    out << m.value;
    if (with_baseline) {
      const MetricDelta* delta = nullptr;
      for (const auto& d : deltas) {
        if (d.metric == m.name) delta = &d;
      }
      if (delta) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%+.3f", delta->delta);
        out << " | " << delta->baseline << " | " << buf << " | ";
        std::snprintf(buf, sizeof(buf), "%+.1f%%", delta->relative_percent);
        out << buf;
      } else {
        out << " | | | ";
      }
    }
    out << " |\n";
  }
  return out.str();
}

void attach_baseline_deltas(EvalReport& report, const EvalReport& baseline,
                            std::string baseline_name) {
  report.baseline_name = std::move(baseline_name);
  report.deltas.clear();
  for (const auto& m : report.aggregates) {
    const MetricValue* base = baseline.find_aggregate(m.name);
    if (!base) continue;
    MetricDelta delta;
    delta.metric = m.name;
    delta.baseline = base->value;
    delta.value = m.value;
    delta.delta = m.value - base->value;
    delta.relative_percent =
        base->value == 0.0 ? 0.0 : 100.0 * delta.delta / std::abs(base->value);
    report.deltas.push_back(std::move(delta));
  }
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  throw ConfigError("unknown report format: " + std::string(name));
}

std::string emit_report(const EvalReport& report, ReportFormat format,
                        const std::string& directory, bool include_timings) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw StorageError("cannot create report directory: " + directory);

  const char* ext = format == ReportFormat::Json
                        ? "json"
                        : (format == ReportFormat::Csv ? "csv" : "md");
  fs::path path = fs::path(directory) / ("report." + std::string(ext));
  std::string body;
  switch (format) {
    case ReportFormat::Json: body = report.to_json(include_timings); break;
    case ReportFormat::Csv: body = report.to_csv(); break;
    case ReportFormat::Markdown: body = report.to_markdown(); break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write report: " + path.string());
  out << body;
  if (!out) throw StorageError("short write to " + path.string());
  return path.string();
}

}  // namespace persona
