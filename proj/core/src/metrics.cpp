#include "persona/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include "persona/errors.hpp"
#include "persona/tokenize.hpp"

namespace persona {

std::string normalize_label(std::string_view text) {
  size_t begin = 0;
  size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return out;
}

namespace {

void require_paired(size_t preds, size_t golds) {
  if (preds != golds) {
    throw DataError("prediction/gold length mismatch: " + std::to_string(preds) +
                    " vs " + std::to_string(golds));
  }
  if (preds == 0) throw DataError("empty prediction list");
}

}  // namespace

MetricValue accuracy(std::span<const std::string> preds,
                     std::span<const std::string> golds) {
  require_paired(preds.size(), golds.size());
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (normalize_label(preds[i]) == normalize_label(golds[i])) ++hits;
  }
  return {"accuracy", static_cast<double>(hits) / static_cast<double>(preds.size()),
          MetricDirection::HigherBetter};
}

MetricValue macro_f1(std::span<const std::string> preds,
                     std::span<const std::string> golds,
                     std::span<const std::string> label_set) {
  require_paired(preds.size(), golds.size());
  if (label_set.empty()) throw DataError("macro F1 needs a non-empty label set");

  struct Counts {
    double tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> per_class;
  for (const auto& label : label_set) per_class[normalize_label(label)];

  for (size_t i = 0; i < preds.size(); ++i) {
    std::string p = normalize_label(preds[i]);
    std::string g = normalize_label(golds[i]);
    auto pit = per_class.find(p);
    auto git = per_class.find(g);
    if (pit != per_class.end() && git != per_class.end() && p == g) {
      pit->second.tp += 1;
    } else {
      if (pit != per_class.end()) pit->second.fp += 1;
      if (git != per_class.end()) git->second.fn += 1;
    }
  }

  double sum = 0.0;
  for (const auto& label : label_set) {
    const Counts& c = per_class.at(normalize_label(label));
    double denom = 2 * c.tp + c.fp + c.fn;
    sum += denom > 0 ? (2 * c.tp) / denom : 0.0;
  }
  return {"f1", sum / static_cast<double>(label_set.size()),
          MetricDirection::HigherBetter};
}

double parse_rating(std::string_view text) {
  std::string s = normalize_label(text);
  double value = 0.0;
  auto result = std::from_chars(s.data(), s.data() + s.size(), value);
  if (result.ec != std::errc() || result.ptr != s.data() + s.size()) {
    return 3.0;  // scale midpoint for malformed generations
  }
  return value;
}

std::pair<MetricValue, MetricValue> mae_rmse(std::span<const double> preds,
                                             std::span<const double> golds) {
  require_paired(preds.size(), golds.size());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - golds[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  double n = static_cast<double>(preds.size());
  MetricValue mae{"mae", abs_sum / n, MetricDirection::LowerBetter};
  MetricValue rmse{"rmse", std::sqrt(sq_sum / n), MetricDirection::LowerBetter};
  return {mae, rmse};
}

MetricValue rouge(std::string_view pred, std::string_view gold, RougeVariant variant) {
  auto gold_tokens = alnum_tokens(gold);
  if (gold_tokens.empty()) throw DataError("ROUGE gold text is empty");
  auto pred_tokens = alnum_tokens(pred);

  const char* name = variant == RougeVariant::Rouge1 ? "rouge1" : "rougeL";
  if (pred_tokens.empty()) {
    return {name, 0.0, MetricDirection::HigherBetter};
  }

  double overlap = 0.0;
  if (variant == RougeVariant::Rouge1) {
    std::map<std::string, int> gold_counts;
    for (const auto& t : gold_tokens) ++gold_counts[t];
    for (const auto& t : pred_tokens) {
      auto it = gold_counts.find(t);
      if (it != gold_counts.end() && it->second > 0) {
        --it->second;
        overlap += 1.0;
      }
    }
  } else {
    // LCS length, O(|pred| * |gold|) with a rolling row.
    std::vector<int> prev(gold_tokens.size() + 1, 0);
    std::vector<int> cur(gold_tokens.size() + 1, 0);
    for (size_t i = 1; i <= pred_tokens.size(); ++i) {
      for (size_t j = 1; j <= gold_tokens.size(); ++j) {
        if (pred_tokens[i - 1] == gold_tokens[j - 1]) {
          cur[j] = prev[j - 1] + 1;
        } else {
          cur[j] = std::max(prev[j], cur[j - 1]);
        }
      }
      std::swap(prev, cur);
    }
    overlap = prev[gold_tokens.size()];
  }

  if (overlap == 0.0) return {name, 0.0, MetricDirection::HigherBetter};
  double precision = overlap / static_cast<double>(pred_tokens.size());
  double recall = overlap / static_cast<double>(gold_tokens.size());
  return {name, 2.0 * precision * recall / (precision + recall),
          MetricDirection::HigherBetter};
}

}  // namespace persona
