#include "hardedge/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hardedge {

namespace {

void require_sorted(std::span<const double> v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty sample");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) throw std::invalid_argument(std::string(what) + ": NaN in sample");
    if (i > 0 && v[i] < v[i - 1]) {
      throw std::invalid_argument(std::string(what) + ": samples must be sorted ascending");
    }
  }
}

// c(alpha) in the Kolmogorov limit law, sqrt(-ln(alpha/2)/2).
double kolmogorov_c(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

// Two-sided Student t quantile at 97.5% for small degrees of freedom.
double t975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131};
  if (dof < 1) return std::numeric_limits<double>::infinity();
  if (dof <= 15) return table[dof - 1];
  return 1.96 + 2.4 / dof;
}

}  // namespace

double ks_statistic(std::span<const double> sorted, const std::function<double(double)>& cdf) {
  require_sorted(sorted, "ks_statistic");
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_statistic(std::span<const double> sorted_a, std::span<const double> sorted_b) {
  require_sorted(sorted_a, "ks_statistic");
  require_sorted(sorted_b, "ks_statistic");
  const double na = static_cast<double>(sorted_a.size());
  const double nb = static_cast<double>(sorted_b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sorted_a.size() && j < sorted_b.size()) {
    const double x = std::min(sorted_a[i], sorted_b[j]);
    while (i < sorted_a.size() && sorted_a[i] <= x) ++i;
    while (j < sorted_b.size() && sorted_b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

double ks_critical_value(int n, double alpha) {
  if (n < 1) throw std::invalid_argument("ks_critical_value needs n >= 1");
  return kolmogorov_c(alpha) / std::sqrt(static_cast<double>(n));
}

double ks_critical_value(int n, int m, double alpha) {
  if (n < 1 || m < 1) throw std::invalid_argument("ks_critical_value needs n, m >= 1");
  return kolmogorov_c(alpha) * std::sqrt((static_cast<double>(n) + m) / (static_cast<double>(n) * m));
}

double dkw_bound(int n, double alpha) {
  if (n < 1) throw std::invalid_argument("dkw_bound needs n >= 1");
  return std::sqrt(std::log(2.0 / alpha) / (2.0 * n));
}

double empirical_survival(std::span<const double> sorted, double x) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

double quantile(std::span<const double> sorted, double p) {
  require_sorted(sorted, "quantile");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double pos = p * (static_cast<double>(sorted.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

QuantileSummary summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  QuantileSummary s;
  s.count = static_cast<int>(values.size());
  s.q50 = quantile(values, 0.5);
  s.q90 = quantile(values, 0.9);
  s.q99 = quantile(values, 0.99);
  const double n = static_cast<double>(values.size());
  const double half = 0.98 * std::sqrt(n);
  const auto lo = static_cast<long long>(std::floor(n / 2.0 - half));
  const auto hi = static_cast<long long>(std::ceil(n / 2.0 + half));
  s.median_lo = values[static_cast<std::size_t>(std::clamp(lo, 0LL, s.count - 1LL))];
  s.median_hi = values[static_cast<std::size_t>(std::clamp(hi, 0LL, s.count - 1LL))];
  return s;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile(values, 0.5);
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("ols_fit needs at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_fit needs distinct x values");
  OlsFit f;
  f.points = static_cast<int>(x.size());
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  const int dof = f.points - 2;
  f.slope_se = dof > 0 ? std::sqrt(rss / dof / sxx) : 0.0;
  const double w = dof > 0 ? t975(dof) * f.slope_se : std::numeric_limits<double>::infinity();
  f.ci_lo = f.slope - w;
  f.ci_hi = f.slope + w;
  return f;
}

SlopeEstimate log_median_slope(std::span<const double> x,
                               const std::vector<std::vector<double>>& groups,
                               const RngStreamSpec& rng, int resamples) {
  if (x.size() != groups.size()) throw std::invalid_argument("one group per x value is required");
  std::vector<double> lx(x.size());
  std::vector<double> ly(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (groups[i].empty()) throw std::invalid_argument("empty group in slope fit");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(median(groups[i]));
  }
  SlopeEstimate est;
  est.fit = ols_fit(lx, ly);
  if (resamples < 1) {
    est.boot_lo = est.boot_hi = est.fit.slope;
    return est;
  }
  Engine engine = make_engine(rng);
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> draw;
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto& g = groups[i];
      std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
      draw.resize(g.size());
      for (double& d : draw) d = g[pick(engine)];
      ly[i] = std::log(median(draw));
    }
    slopes.push_back(ols_fit(lx, ly).slope);
  }
  std::sort(slopes.begin(), slopes.end());
  est.boot_lo = quantile(slopes, 0.025);
  est.boot_hi = quantile(slopes, 0.975);
  return est;
}

}  // namespace hardedge
