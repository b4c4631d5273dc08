#include <cmath>

#include "doctest.h"

#include "hardedge/ensembles.hpp"

using namespace hardedge;

TEST_SUITE("ensembles") {
  TEST_CASE("built-in laws carry normalized moments") {
    for (const auto& law : {gaussian_real(), gaussian_complex(), rademacher(), rademacher(true),
                            uniform_symmetric(), three_point(std::sqrt(2.0), 0.25)}) {
      CAPTURE(law.label());
      CHECK_NOTHROW(validate(law));
      CHECK(law.moments[0] == 0.0);
      CHECK(law.moments[1] == doctest::Approx(1.0));
    }
    CHECK(rademacher().moments[3] == 1.0);
    CHECK(uniform_symmetric().moments[3] == doctest::Approx(1.8));
  }

  TEST_CASE("validate rejects inconsistent laws") {
    auto bad = rademacher();
    bad.moments[1] = 2.0;
    CHECK_THROWS_AS(validate(bad), std::invalid_argument);
    auto skew = three_point(1.0, 0.5);
    skew.probs = {0.6, 0.0, 0.4};
    CHECK_THROWS_AS(validate(skew), std::invalid_argument);
  }

  TEST_CASE("empirical moments match the declared ones") {
    for (const auto& law : {gaussian_real(), rademacher(), uniform_symmetric()}) {
      CAPTURE(law.label());
      const auto report = check_assumptions(law, 200000, RngStreamSpec{3, 1});
      CHECK(report.ok());
      CHECK(report.moments[3] == doctest::Approx(law.moments[3]).epsilon(0.05));
    }
  }

  TEST_CASE("a mislabeled sampler is flagged") {
    const auto law = rademacher();
    const auto report = check_assumptions(law, 100000, RngStreamSpec{3, 2}, [](Engine& e) {
      std::normal_distribution<double> n(0.5, 1.0);
      return n(e);
    });
    CHECK_FALSE(report.ok());
    CHECK_FALSE(report.violations().empty());
  }

  TEST_CASE("moment matching keeps three moments and sets the fourth gap") {
    for (double gap : {0.0, 0.5, 1.2, 2.0}) {
      const auto law = match_first_three_moments(gap);
      CHECK(law.moments[0] == doctest::Approx(0.0));
      CHECK(law.moments[1] == doctest::Approx(1.0));
      CHECK(law.moments[2] == doctest::Approx(0.0));
      CHECK(std::abs(law.moments[3] - 3.0) == doctest::Approx(gap));
    }
    CHECK_THROWS_AS(match_first_three_moments(2.5), std::invalid_argument);
    CHECK_THROWS_AS(match_first_three_moments(-0.1), std::invalid_argument);
  }

  TEST_CASE("sampling is deterministic per stream and scaled by 1/sqrt(N)") {
    const auto a = sample_matrix(rademacher(), 40, 30, RngStreamSpec{5, 9});
    const auto b = sample_matrix(rademacher(), 40, 30, RngStreamSpec{5, 9});
    const auto c = sample_matrix(rademacher(), 40, 30, RngStreamSpec{5, 10});
    CHECK(a.real() == b.real());
    CHECK(a.real() != c.real());
    CHECK(a.rows == 40);
    CHECK(a.cols == 30);
    CHECK(std::abs(a.real()(3, 4)) == doctest::Approx(1.0 / std::sqrt(30.0)));

    const auto z = sample_matrix(gaussian_complex(), 200, 200, RngStreamSpec{5, 11});
    double re = 0.0, im = 0.0;
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 200; ++j) {
        re += std::norm(z.complex()(i, j).real());
        im += std::norm(z.complex()(i, j).imag());
      }
    }
    // Each part carries half of the 1/N variance.
    CHECK(re / 200.0 == doctest::Approx(0.5).epsilon(0.03));
    CHECK(im / 200.0 == doctest::Approx(0.5).epsilon(0.03));
    CHECK_THROWS_AS(sample_matrix(rademacher(), 3, 4, RngStreamSpec{}), std::invalid_argument);
  }

  TEST_CASE("child streams are distinct and stable") {
    const RngStreamSpec root{1, 2};
    CHECK(root.child(0) == root.child(0));
    CHECK(root.child(0).stream_id != root.child(1).stream_id);
    CHECK(root.child(0).master_seed == root.master_seed);
  }
}
