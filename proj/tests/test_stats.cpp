#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "hardedge/stats.hpp"

using namespace hardedge;

TEST_SUITE("stats") {
  TEST_CASE("ks against a cdf") {
    const std::vector<double> one{0.5};
    CHECK(ks_statistic(one, [](double x) { return std::clamp(x, 0.0, 1.0); }) == doctest::Approx(0.5));

    // Samples from the reference law stay under the 95% critical value 1.358/sqrt(4000).
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(4000);
    for (double& v : x) v = u(rng);
    std::sort(x.begin(), x.end());
    CHECK(ks_critical_value(4000) == doctest::Approx(0.0215).epsilon(0.01));
    CHECK(ks_statistic(x, [](double v) { return v; }) <= ks_critical_value(4000));
  }

  TEST_CASE("two-sample ks") {
    const std::vector<double> a{0.1, 0.2, 0.3};
    CHECK(ks_statistic(a, a) == 0.0);
    const std::vector<double> b{1.0, 2.0};
    CHECK(ks_statistic(a, b) == doctest::Approx(1.0));
    const std::vector<double> c{0.15, 0.25};
    // After 0.1: 1/3 vs 0; after 0.15: 1/3 vs 1/2; after 0.2: 2/3 vs 1/2 ...
    CHECK(ks_statistic(a, c) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("ks rejects bad input") {
    const std::vector<double> unsorted{0.3, 0.1};
    const std::vector<double> empty;
    const std::vector<double> nan{std::nan("")};
    auto id = [](double v) { return v; };
    CHECK_THROWS_AS(ks_statistic(unsorted, id), std::invalid_argument);
    CHECK_THROWS_AS(ks_statistic(empty, id), std::invalid_argument);
    CHECK_THROWS_AS(ks_statistic(nan, id), std::invalid_argument);
    CHECK_THROWS_AS(ks_statistic(unsorted, unsorted), std::invalid_argument);
  }

  TEST_CASE("dkw and survival") {
    CHECK(dkw_bound(4000) == doctest::Approx(std::sqrt(std::log(40.0) / 8000.0)));
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    CHECK(empirical_survival(x, 2.0) == doctest::Approx(0.5));
    CHECK(empirical_survival(x, 0.0) == 1.0);
    CHECK(empirical_survival(x, 4.0) == 0.0);
  }

  TEST_CASE("quantiles are monotone in level") {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> v(101 + rep * 13);
      for (double& x : v) x = e(rng);
      const auto q = summarize(v);
      CHECK(q.q50 <= q.q90);
      CHECK(q.q90 <= q.q99);
      CHECK(q.median_lo <= q.q50);
      CHECK(q.q50 <= q.median_hi);
    }
    const std::vector<double> s{0.0, 1.0, 2.0, 3.0};
    CHECK(quantile(s, 0.5) == doctest::Approx(1.5));
    CHECK(quantile(s, 1.0) == 3.0);
  }

  TEST_CASE("ols recovers an exact line") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{1.0, 3.0, 5.0, 7.0};
    const auto f = ols_fit(x, y);
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(-1.0));
    CHECK(f.slope_se == doctest::Approx(0.0));
    CHECK_THROWS_AS(ols_fit(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 1.0}), std::invalid_argument);
  }

  TEST_CASE("log-median slope of a power law") {
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0};
    std::vector<std::vector<double>> groups;
    std::mt19937_64 rng(5);
    std::lognormal_distribution<double> noise(0.0, 0.3);
    for (double xi : x) {
      std::vector<double> g(400);
      for (double& v : g) v = noise(rng) / xi;
      groups.push_back(g);
    }
    const auto est = log_median_slope(x, groups, RngStreamSpec{9, 0}, 200);
    CHECK(est.fit.slope == doctest::Approx(-1.0).epsilon(0.1));
    CHECK(est.boot_lo <= est.fit.slope);
    CHECK(est.fit.slope <= est.boot_hi);
  }
}
