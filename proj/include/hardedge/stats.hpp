#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hardedge/rng.hpp"

namespace hardedge {

/// sup |F_n - F| for ascending samples. Throws on empty or unsorted input.
double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf);

/// Two-sample sup |F_n - G_m| for ascending samples.
double ks_statistic(std::span<const double> sorted_a, std::span<const double> sorted_b);

/// Asymptotic Kolmogorov critical values, 1.358/sqrt(n) at level 0.05.
double ks_critical_value(int n, double alpha = 0.05);
double ks_critical_value(int n, int m, double alpha = 0.05);

/// Dvoretzky-Kiefer-Wolfowitz half-width sqrt(ln(2/alpha) / (2n)).
double dkw_bound(int n, double alpha = 0.05);

/// Fraction of ascending samples strictly above x.
double empirical_survival(std::span<const double> sorted, double x);

/// Linear-interpolation quantile of ascending samples, p in [0, 1].
double quantile(std::span<const double> sorted, double p);

struct QuantileSummary {
  int count = 0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  // Distribution-free 95% interval for the median from order statistics.
  double median_lo = 0.0;
  double median_hi = 0.0;
};

/// Sorts a copy of `values`.
QuantileSummary summarize(std::vector<double> values);

double median(std::vector<double> values);

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_lo = 0.0;  // 95% t interval
  double ci_hi = 0.0;
  int points = 0;
};

OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

/// Slope of log(median of group i) against log(x_i), with a percentile
/// bootstrap interval from resampling each group with replacement.
struct SlopeEstimate {
  OlsFit fit;
  double boot_lo = 0.0;
  double boot_hi = 0.0;
};

SlopeEstimate log_median_slope(std::span<const double> x,
                               const std::vector<std::vector<double>>& groups,
                               const RngStreamSpec& rng, int resamples = 500);

}  // namespace hardedge
