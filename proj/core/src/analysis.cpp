#include "persona/analysis.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "persona/errors.hpp"

namespace persona {

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("pearson correlation needs two equal-length samples");
  }
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double dx = x[i] - mx;
    double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw DataError("pearson correlation undefined for a constant sample");
  }
  return sxy / std::sqrt(sxx * syy);
}

std::pair<double, double> fisher_confidence_interval(double r, size_t n) {
  if (n < 3) throw DataError("Fisher interval needs n >= 3");
  // The z standard error 1/sqrt(n-3) is infinite at n = 3: the interval is
  // the whole range.
  if (n == 3) return {-1.0, 1.0};
  // atanh explodes at |r| = 1; clamp just inside the open interval.
  double clamped = std::max(-1.0 + 1e-12, std::min(1.0 - 1e-12, r));
  double z = std::atanh(clamped);
  double se = 1.0 / std::sqrt(static_cast<double>(n - 3));
  constexpr double z95 = 1.959963984540054;
  return {std::tanh(z - z95 * se), std::tanh(z + z95 * se)};
}

std::pair<double, double> ols_fit(std::span<const double> x,
                                  std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("OLS needs two equal-length samples");
  }
  double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DataError("OLS undefined for constant x");
  double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

CorrelationReport profile_size_analysis(const EvalReport& personalized,
                                        const EvalReport& baseline,
                                        std::string metric) {
  if (metric.empty()) {
    TaskId task = parse_task(personalized.config.task);
    metric = primary_metric_for(task);
  }
  MetricDirection direction = (metric == "mae" || metric == "rmse")
                                  ? MetricDirection::LowerBetter
                                  : MetricDirection::HigherBetter;

  std::vector<double> sizes;
  std::vector<double> improvements;
  size_t ties = 0;
  for (const auto& user : personalized.users) {
    if (user.failed()) continue;
    const PerUserResult* base = baseline.find_user(user.user_id);
    if (!base) {
      throw DataError("baseline report is missing user " + user.user_id);
    }
    if (base->failed()) continue;
    auto it = user.metrics.find(metric);
    auto bit = base->metrics.find(metric);
    if (it == user.metrics.end() || bit == base->metrics.end()) {
      throw DataError("metric '" + metric + "' missing from per-user results");
    }
    double value = it->second;
    double base_value = bit->second;
    if (value == base_value) {
      ++ties;  // no change in performance: excluded
      continue;
    }
    bool gained = direction == MetricDirection::HigherBetter ? value > base_value
                                                             : value < base_value;
    sizes.push_back(static_cast<double>(user.profile_size));
    improvements.push_back(gained ? 1.0 : -1.0);
  }

  if (sizes.size() < 3) {
    throw DataError("insufficient data: only " + std::to_string(sizes.size()) +
                    " users with nonzero improvement");
  }
  bool all_same = true;
  for (double v : improvements) {
    if (v != improvements.front()) {
      all_same = false;
      break;
    }
  }
  if (all_same) {
    throw DataError(
        "correlation undefined: every non-tied user moved in the same "
        "direction (improvement is constant)");
  }

  CorrelationReport report;
  report.n = sizes.size();
  report.excluded_ties = ties;
  report.metric = metric;
  report.pearson_r = pearson_correlation(sizes, improvements);
  auto [lo, hi] = fisher_confidence_interval(report.pearson_r, report.n);
  report.ci_low = lo;
  report.ci_high = hi;
  auto [slope, intercept] = ols_fit(sizes, improvements);
  report.ols_slope = slope;
  report.ols_intercept = intercept;
  return report;
}

std::string CorrelationReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["metric"] = metric;
  doc["n"] = n;
  doc["excluded_ties"] = excluded_ties;
  doc["pearson_r"] = pearson_r;
  doc["ci_95"] = {ci_low, ci_high};
  doc["ci_method"] = "fisher-z";
  doc["ols_slope"] = ols_slope;
  doc["ols_intercept"] = ols_intercept;
  return doc.dump(2);
}

}  // namespace persona
