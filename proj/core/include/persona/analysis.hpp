#pragma once

#include <span>
#include <string>
#include <vector>

#include "persona/report.hpp"

namespace persona {

// Profile-size vs improvement correlation study. Improvement per user is
// +1 when the personalized run beats the baseline on the primary metric and
// -1 when it does not; ties are excluded before fitting.
struct CorrelationReport {
  size_t n = 0;              // users with nonzero improvement
  size_t excluded_ties = 0;
  double pearson_r = 0.0;
  double ci_low = 0.0;        // 95% CI via Fisher z-transform
  double ci_high = 0.0;
  double ols_slope = 0.0;     // improvement regressed on profile size
  double ols_intercept = 0.0;
  std::string metric;

  std::string to_json() const;
};

double pearson_correlation(std::span<const double> x, std::span<const double> y);

// 95% confidence interval for a Pearson r at sample size n (Fisher z).
std::pair<double, double> fisher_confidence_interval(double r, size_t n);

// Least squares fit y = slope * x + intercept.
std::pair<double, double> ols_fit(std::span<const double> x,
                                  std::span<const double> y);

// Both reports must cover the same users. `metric` defaults to the task's
// primary metric when empty. Throws when fewer than 3 non-tied users remain.
CorrelationReport profile_size_analysis(const EvalReport& personalized,
                                        const EvalReport& baseline,
                                        std::string metric = {});

}  // namespace persona
