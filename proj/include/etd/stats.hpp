#pragma once

#include <vector>

namespace etd::stats {

/// Linear-interpolated quantile; q in [0, 1]. Sorts a copy.
double percentile_linear(std::vector<double> values, double q);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct AffineFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
/// Least-squares fit y ~ slope * x + intercept.
AffineFit affine_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // population

/// Welch's t statistic for two independent samples.
double welch_t(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace etd::stats
