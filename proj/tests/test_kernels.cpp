#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "doctest.h"

#include "hardedge/kernels.hpp"

using namespace hardedge;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar kernels match naive loops") {
    const auto& k = kernels::scalar_table();
    const std::vector<double> v{-1.0, 0.5, 2.0};
    const std::vector<double> f{1.0, -2.0, 3.0};
    CHECK(k.inverse_sum(0.25, v) == doctest::Approx(1 / 1.25 + 1 / -0.25 + 1 / -1.75));
    CHECK(k.coupling_weight(0.0, v) == doctest::Approx(1.0 + 4.0 + 0.25));
    CHECK(k.coupling_sum(0.0, 1.0, v, f) == doctest::Approx(0.0 + -3.0 * 4.0 + 2.0 * 0.25));
    const auto s = k.stieltjes_sum({0.0, 1.0}, v, {});
    std::complex<double> expect{};
    for (double x : v) expect += 1.0 / (x - std::complex<double>(0.0, 1.0));
    CHECK(std::abs(s - expect) < 1e-15);
  }

  TEST_CASE("vector variants agree with the scalar reference") {
    const auto* wide = kernels::avx2_table();
    if (wide == nullptr) {
      MESSAGE("AVX2 variant unavailable on this build or CPU; nothing to compare");
      return;
    }
    const auto& ref = kernels::scalar_table();
    std::mt19937_64 rng(42);
    // Lengths straddle the 4-lane width and the unrolled block.
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 257u}) {
      auto v = random_vector(rng, n, -2.0, 2.0);
      auto f = random_vector(rng, n, -1.0, 1.0);
      const double x = 2.5;  // off the support, no cancellation blowups
      CHECK(close(wide->inverse_sum(x, v), ref.inverse_sum(x, v), 1e-12));
      CHECK(close(wide->coupling_weight(x, v), ref.coupling_weight(x, v), 1e-12));
      CHECK(close(wide->coupling_sum(x, 0.3, v, f), ref.coupling_sum(x, 0.3, v, f), 1e-12));
      const std::complex<double> z{0.3, 0.05};
      CHECK(std::abs(wide->stieltjes_sum(z, v, f) - ref.stieltjes_sum(z, v, f)) <=
            1e-12 * std::max(1.0, std::abs(ref.stieltjes_sum(z, v, f))));
      CHECK(std::abs(wide->stieltjes_sum(z, v, {}) - ref.stieltjes_sum(z, v, {})) <=
            1e-12 * std::max(1.0, std::abs(ref.stieltjes_sum(z, v, {}))));
    }
  }

  TEST_CASE("environment override selects the scalar path") {
    const char* forced = std::getenv("HARDEDGE_KERNELS");
    if (forced == nullptr || std::string(forced) != "scalar") {
      MESSAGE("HARDEDGE_KERNELS=scalar not set for this run");
      return;
    }
    CHECK(kernels::active().name == kernels::scalar_table().name);
  }
}
