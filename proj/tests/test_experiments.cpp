#include <cmath>

#include "doctest.h"

#include "hardedge/experiments.hpp"

using namespace hardedge;

namespace {

ExperimentConfig small_config(const std::string& name, EntryLaw law) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.n_list = {16, 32};
  cfg.ensemble = std::move(law);
  cfg.trials = 100;
  cfg.master_seed = 11;
  return cfg;
}

void check_record_invariants(const SummaryStats& s) {
  REQUIRE_FALSE(s.records.empty());
  for (const auto& r : s.records) {
    CHECK(r.sigma1 >= 0.0);
    CHECK(r.sigma1 <= r.sigma_n);
    CHECK(r.m >= r.n);
    if (r.sigma1 > 0.0) CHECK(std::abs(r.kappa - r.sigma_n / r.sigma1) <= 1e-12 * r.kappa);
  }
}

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("config validation") {
    auto cfg = small_config("universality", rademacher());
    CHECK_NOTHROW(validate(cfg));
    cfg.trials = 99;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = small_config("universality", rademacher());
    cfg.n_list = {32, 16};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.n_list = {};
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg = small_config("universality", rademacher());
    cfg.m_offset = "double";
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  }

  TEST_CASE("row count for the offsets") {
    auto cfg = small_config("nonsquare", gaussian_complex());
    CHECK(rows_for(cfg, 128) == 128);
    cfg.m_offset = "log";
    CHECK(rows_for(cfg, 128) == 128 + 5);
    CHECK(rows_for(cfg, 100) == 100 + 5);
    CHECK(knob(cfg, "epsilon", 0.2) == 0.2);
    cfg.knobs["epsilon"] = 0.1;
    CHECK(knob(cfg, "epsilon", 0.2) == 0.1);
  }

  TEST_CASE("universality run: invariants, reproducibility, thread independence") {
    auto cfg = small_config("universality", rademacher());
    cfg.grid = {0.5, 1.0, 2.0};
    const auto a = run_universality_smallest(cfg, 1);
    check_record_invariants(a);
    CHECK(a.records.size() == 2u * 100u);
    const auto b = run_universality_smallest(cfg, 3);
    CHECK(a.records == b.records);
    cfg.master_seed = 12;
    const auto c = run_universality_smallest(cfg, 1);
    CHECK(a.records != c.records);
    bool saw_sandwich = false;
    for (const auto& m : a.margins) saw_sandwich |= m.name.rfind("sandwich_", 0) == 0;
    CHECK(saw_sandwich);
  }

  TEST_CASE("tightening epsilon never increases a sandwich margin") {
    auto cfg = small_config("universality", rademacher());
    cfg.grid = {0.5, 1.0};
    cfg.knobs["epsilon"] = 0.3;
    const auto loose = run_universality_smallest(cfg);
    cfg.knobs["epsilon"] = 0.05;
    const auto tight = run_universality_smallest(cfg);
    REQUIRE(loose.margins.size() == tight.margins.size());
    for (std::size_t i = 0; i < loose.margins.size(); ++i) {
      CAPTURE(loose.margins[i].name);
      CHECK(tight.margins[i].margin() <= loose.margins[i].margin() + 1e-15);
    }
  }

  TEST_CASE("smoothed run records the normalized statistic") {
    auto cfg = small_config("smoothed", gaussian_real());
    cfg.grid = {0.5, 1.0};
    const auto s = run_smoothed_singular(cfg);
    check_record_invariants(s);
    for (const auto& r : s.records) {
      const double l = r.param;
      CHECK(r.aux2 == doctest::Approx(r.n * double(r.n) * std::log1p(l * l) * r.aux1 / std::sqrt(1 + l * l)));
    }
    CHECK(s.group("normalized", 16, 0.5) != nullptr);
    CHECK(s.slope("lambda_slope/N=16") != nullptr);
    cfg.grid = {0.1};
    CHECK_THROWS_AS(run_smoothed_singular(cfg), std::invalid_argument);
  }

  TEST_CASE("complex exact run rejects real laws") {
    auto cfg = small_config("complex-exact", rademacher());
    CHECK_THROWS_AS(run_complex_exact(cfg), std::invalid_argument);
    cfg.ensemble = gaussian_complex();
    const auto s = run_complex_exact(cfg);
    check_record_invariants(s);
    CHECK(s.ks.size() == 4);
  }

  TEST_CASE("reference laws") {
    CHECK(complex_exact_cdf(0.0) == 0.0);
    CHECK(complex_exact_cdf(1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
    CHECK(complex_squared_exp_cdf(2.0) == doctest::Approx(1.0 - std::exp(-4.0)));
    CHECK(complex_exact_cdf(1.0) == doctest::Approx(complex_squared_exp_cdf(1.0)));
  }

  TEST_CASE("condition and nonsquare runs") {
    auto cfg = small_config("condition", rademacher());
    cfg.n_list = {16};
    cfg.grid = {1.0};
    cfg.r_grid = {1.0, 4.0};
    const auto c = run_condition(cfg);
    check_record_invariants(c);

    auto ns = small_config("nonsquare", gaussian_complex());
    ns.n_list = {16};
    ns.r_grid = {1.0, 4.0};
    const auto s = run_nonsquare(ns);
    check_record_invariants(s);
    bool rect = false;
    for (const auto& r : s.records) rect |= r.m == 16 + 3;
    CHECK(rect);
  }

  TEST_CASE("coupled run on a small grid") {
    auto cfg = small_config("coupled", rademacher());
    cfg.grid = {0.01, 0.02};
    cfg.knobs["slope_t"] = 0.02;
    const auto s = run_coupled_relaxation(cfg);
    for (const auto& r : s.records) {
      CHECK(r.aux1 >= 0.0);
      CHECK(r.aux2 == doctest::Approx(r.n * double(r.n) * r.param * r.aux1));
    }
    CHECK(s.slope("t_slope/N=16") != nullptr);
    cfg.ensemble = gaussian_complex();
    CHECK_THROWS_AS(run_coupled_relaxation(cfg), std::invalid_argument);
  }

  TEST_CASE("application calculators") {
    CHECK(lop_estimate(100, 100, 100.0) == doctest::Approx(9.0));
    CHECK(lop_estimate(1, 1, 1.0) == 0.0);
    CHECK(cg_iterations(400.0, 0.5) == 100.0);
    CHECK_THROWS_AS(lop_estimate(0, 1, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(cg_iterations(0.5, 1.0), std::invalid_argument);
  }
}
