#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace persona {

enum class MetricDirection { HigherBetter, LowerBetter };

struct MetricValue {
  std::string name;
  double value = 0.0;
  MetricDirection direction = MetricDirection::HigherBetter;
};

// Trimmed + lowercased, the normalization applied before label comparison.
std::string normalize_label(std::string_view text);

// Fraction of exact matches after normalization.
MetricValue accuracy(std::span<const std::string> preds,
                     std::span<const std::string> golds);

// Unweighted mean of per-class F1 over `label_set`. Out-of-set predictions
// count as wrong for every class; classes absent from preds and golds
// contribute F1 = 0.
MetricValue macro_f1(std::span<const std::string> preds,
                     std::span<const std::string> golds,
                     std::span<const std::string> label_set);

// Rating-string parser for ordinal metrics: unparseable predictions map to
// the scale midpoint 3.
double parse_rating(std::string_view text);

std::pair<MetricValue, MetricValue> mae_rmse(std::span<const double> preds,
                                             std::span<const double> golds);

enum class RougeVariant { Rouge1, RougeL };

// F-measure (beta = 1) over lowercase alphanumeric tokens; ROUGE-1 uses
// clipped unigram overlap, ROUGE-L the longest common subsequence.
MetricValue rouge(std::string_view pred, std::string_view gold, RougeVariant variant);

}  // namespace persona
