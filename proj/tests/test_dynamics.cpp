#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"

#include "hardedge/dynamics.hpp"

using namespace hardedge;

namespace {

DbmState initial_state(int n, std::uint64_t stream, bool complex_entries = false) {
  const auto a = sample_matrix(complex_entries ? gaussian_complex() : gaussian_real(), n, n,
                               RngStreamSpec{31, stream});
  return DbmState::from_spectrum(SymmetrizedSpectrum(singular_values(a)));
}

// Direct double loop over labels with l != +-k.
std::vector<double> naive_drift(const std::vector<double>& full) {
  const int n = static_cast<int>(full.size()) / 2;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int k = 1; k <= n; ++k) {
    double acc = 0.0;
    for (int l = -n; l <= n; ++l) {
      if (l == 0 || l == k || l == -k) continue;
      acc += 1.0 / (full[label_to_slot(k, n)] - full[label_to_slot(l, n)]);
    }
    out[k - 1] = acc / (2.0 * n);
  }
  return out;
}

std::vector<double> gaussian_increments(int n, double dt, std::uint64_t stream) {
  Engine e = make_engine(RngStreamSpec{32, stream});
  std::normal_distribution<double> nd(0.0, std::sqrt(dt));
  std::vector<double> dw(static_cast<std::size_t>(n));
  for (double& x : dw) x = nd(e);
  return dw;
}

Trajectory short_trajectory(int n, double t_end, std::uint64_t stream) {
  std::vector<DbmState> sys{initial_state(n, stream)};
  Engine e = make_engine(RngStreamSpec{33, stream});
  DbmOptions opts;
  opts.dt_max = 1e-3;
  return dbm_trajectory(sys, t_end, 0.0, opts, e);
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("drift matches the naive double loop") {
    for (int n : {2, 5, 33}) {
      const auto st = initial_state(n, static_cast<std::uint64_t>(n));
      const auto fast = dbm_drift(st);
      const auto slow = naive_drift(st.full());
      for (int k = 0; k < n; ++k) CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("implicit step solves its defining equation") {
    const int n = 40;
    const auto st = initial_state(n, 1);
    for (double dt : {1e-4, 1e-3, 1e-2}) {
      const auto dw = gaussian_increments(n, dt, 7);
      std::uint64_t iters = 0;
      const auto next = dbm_step(st, dt, dw, 100, &iters);
      CHECK(iters > 0);
      CHECK(next.t == doctest::Approx(st.t + dt));
      const auto b = dbm_drift(next);
      for (int k = 0; k < n; ++k) {
        const double rhs = st.s[k] + dw[k] / std::sqrt(double(n)) + dt * (-0.5 * next.s[k] + b[k]);
        CHECK(std::abs(next.s[k] - rhs) < 1e-9);
      }
    }
  }

  TEST_CASE("implicit and explicit steps agree for small dt") {
    const int n = 30;
    const auto st = initial_state(n, 2);
    const double dt = 1e-7;
    const auto dw = gaussian_increments(n, dt, 8);
    const auto a = dbm_step(st, dt, dw);
    const auto b = dbm_step_explicit(st, dt, dw);
    for (int k = 0; k < n; ++k) CHECK(std::abs(a.s[k] - b.s[k]) < 1e-8);
  }

  TEST_CASE("ordering survives large noise draws") {
    const int n = 24;
    auto st = initial_state(n, 3);
    for (int i = 0; i < 200; ++i) {
      auto dw = gaussian_increments(n, 0.05, 100 + static_cast<std::uint64_t>(i));
      st = dbm_step(st, 0.05, dw);
      REQUIRE(st.ordered());
    }
    CHECK(st.min_gap() > 0.0);
  }

  TEST_CASE("identical starting data stay identical under shared noise") {
    std::vector<DbmState> sys{initial_state(20, 4), initial_state(20, 4)};
    Engine e = make_engine(RngStreamSpec{34, 0});
    const auto stats = dbm_evolve(sys, 0.05, DbmOptions{}, e);
    CHECK(stats.accepted >= 50);
    CHECK(sys[0].s == sys[1].s);
    CHECK(sys[0].t == doctest::Approx(0.05));
  }

  TEST_CASE("coupled flow from the same matrix has zero gap") {
    const auto h = sample_matrix(rademacher(), 16, 16, RngStreamSpec{35, 0});
    const std::vector<double> grid{0.0, 0.01, 0.02};
    const auto snaps = coupled_dbm(h, h, grid, DbmOptions{}, RngStreamSpec{35, 1});
    REQUIRE(snaps.size() == 3);
    for (const auto& s : snaps) CHECK(s.max_gap() == 0.0);
    const auto g = sample_matrix(gaussian_real(), 16, 16, RngStreamSpec{35, 2});
    const auto diff = coupled_dbm(h, g, grid, DbmOptions{}, RngStreamSpec{35, 1});
    CHECK(diff.front().sigma1_gap() ==
          doctest::Approx(singular_values(h).smallest() - singular_values(g).smallest()));
  }

  TEST_CASE("matrix interpolation endpoints") {
    const auto h = sample_matrix(rademacher(), 8, 8, RngStreamSpec{36, 0});
    const auto g = sample_matrix(gaussian_real(), 8, 8, RngStreamSpec{36, 1});
    CHECK(ou_interpolate(h, g, 0.0).real().isApprox(h.real()));
    const auto far = ou_interpolate(h, g, 40.0).real();
    CHECK((far - g.real()).norm() < 1e-6);
  }

  TEST_CASE("parabolic generator conserves mass and obeys the maximum principle") {
    const int n = 12;
    const auto traj = short_trajectory(n, 0.02, 5);
    REQUIRE(traj.size() > 2);
    std::vector<double> phi(2 * n);
    for (int i = 0; i < 2 * n; ++i) phi[i] = std::sin(0.7 * i);
    const auto full0 = traj.full(0);
    const auto act = parabolic_action(full0, phi);
    CHECK(std::abs(std::accumulate(act.begin(), act.end(), 0.0)) < 1e-9 * parabolic_stiffness(full0));

    const double dt = 0.5 / std::max(parabolic_stiffness(full0), 1.0);
    const auto out = evolve_phi(phi, traj, dt);
    const double before = std::accumulate(phi.begin(), phi.end(), 0.0);
    const double after = std::accumulate(out.begin(), out.end(), 0.0);
    CHECK(after == doctest::Approx(before).epsilon(1e-9).scale(1.0));
    CHECK(*std::max_element(out.begin(), out.end()) <= *std::max_element(phi.begin(), phi.end()) + 1e-12);
    CHECK(*std::min_element(out.begin(), out.end()) >= *std::min_element(phi.begin(), phi.end()) - 1e-12);
  }

  TEST_CASE("kernel split adds back to the full operator") {
    const int n = 10;
    const auto st = initial_state(n, 6);
    const KernelOperator k(st.full());
    const auto [near, far] = split_kernel(k, 3);
    CHECK(near.cutoff() == 3);
    CHECK(near.nonzeros() + far.nonzeros() == k.nonzeros());
    std::vector<double> v(2 * n);
    for (int i = 0; i < 2 * n; ++i) v[i] = std::cos(1.3 * i);
    const auto a = k.apply(v), b = near.apply(v), c = far.apply(v);
    for (int i = 0; i < 2 * n; ++i) CHECK(a[i] == doctest::Approx(b[i] + c[i]).epsilon(1e-12));
    CHECK(k.max_row_sum() == doctest::Approx(parabolic_stiffness(st.full())).epsilon(1e-12));
    CHECK(near.max_row_sum() <= k.max_row_sum());
  }

  TEST_CASE("short-range propagator keeps a probability vector") {
    const int n = 12;
    const auto traj = short_trajectory(n, 0.02, 7);
    const auto p = short_range_propagator(traj, 2, 0.0, 0.01, 3);
    REQUIRE(p.size() == static_cast<std::size_t>(2 * n));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (double x : p) CHECK(x >= -1e-14);
    CHECK_THROWS_AS(short_range_propagator(traj, 1, 0.0, 0.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(short_range_propagator(traj, 2, 0.0, 0.01, 0), std::out_of_range);
  }

  TEST_CASE("trajectory csv round trip") {
    const auto traj = short_trajectory(6, 0.005, 8);
    std::stringstream io;
    write_trajectory_csv(io, traj);
    const auto back = read_trajectory_csv(io);
    CHECK(back.times == traj.times);
    CHECK(back.positive == traj.positive);
  }

  TEST_CASE("coupling run carries phi from the initial spectra") {
    const int n = 10;
    const auto h = singular_values(sample_matrix(rademacher(), n, n, RngStreamSpec{37, 0}));
    const auto g = singular_values(sample_matrix(gaussian_real(), n, n, RngStreamSpec{37, 1}));
    CouplingOptions opts;
    const auto run = run_coupling(h, g, 0.5, 0.01, opts, RngStreamSpec{37, 2});
    for (int k = 1; k <= n; ++k) {
      const int slot = label_to_slot(k, n);
      CHECK(run.initial.phi[slot] == doctest::Approx(g.values[k - 1] - h.values[k - 1]));
      CHECK(run.initial.psi[slot] == doctest::Approx(std::abs(g.values[k - 1] - h.values[k - 1])));
    }
    CHECK(run.final.t == doctest::Approx(0.01));
    CHECK(run.phi_finite_difference.size() == static_cast<std::size_t>(2 * n));
  }
}
