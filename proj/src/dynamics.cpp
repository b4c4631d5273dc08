#include "hardedge/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hardedge/kernels.hpp"
#include "hardedge/linalg.hpp"

namespace hardedge {

namespace {

std::vector<double> mirror_signed(std::span<const double> positive) {
  const std::size_t n = positive.size();
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[n - 1 - i] = -positive[i];
    out[n + i] = positive[i];
  }
  return out;
}

// Sums f over the 2N-array with the slots of labels k and -k removed.
template <class F>
double sum_excluding_pair(std::span<const double> full, int slot_a, int slot_b, F&& f) {
  const int lo = std::min(slot_a, slot_b);
  const int hi = std::max(slot_a, slot_b);
  const int size = static_cast<int>(full.size());
  return f(full.subspan(0, lo)) + f(full.subspan(lo + 1, hi - lo - 1)) +
         f(full.subspan(hi + 1, size - hi - 1));
}

int mirror_slot(int slot, int n) { return 2 * n - 1 - slot; }

void check_time_grid(std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || (i > 0 && grid[i] < grid[i - 1])) {
      throw std::invalid_argument("time grid must be non-negative and ascending");
    }
  }
}

}  // namespace

MatrixSample ou_interpolate(const MatrixSample& h, const MatrixSample& g, double t) {
  if (h.rows != g.rows || h.cols != g.cols) {
    throw std::invalid_argument("ou_interpolate: dimension mismatch");
  }
  if (h.is_complex() != g.is_complex()) {
    throw std::invalid_argument("ou_interpolate: real and complex inputs cannot be mixed");
  }
  if (!(t >= 0.0)) throw std::invalid_argument("ou_interpolate needs t >= 0");
  const double a = std::exp(-t / 2.0);
  const double b = std::sqrt(-std::expm1(-t));
  if (h.is_complex()) {
    if (t == 0.0) return h;
    return make_sample(Eigen::MatrixXcd(a * h.complex() + b * g.complex()), h.seed_path);
  }
  if (t == 0.0) return h;
  return make_sample(Eigen::MatrixXd(a * h.real() + b * g.real()), h.seed_path);
}

MatrixSample ou_sde_path(const MatrixSample& h0, double dt, int steps, const RngStreamSpec& rng,
                         double noise_scale) {
  if (!(dt > 0.0) || dt > 1e-2) throw std::invalid_argument("ou_sde_path needs 0 < dt <= 1e-2");
  if (steps < 0 || dt * steps > 10.0) {
    throw std::invalid_argument("ou_sde_path needs dt * steps <= 10");
  }
  Engine engine = make_engine(rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double amp = noise_scale * std::sqrt(dt / h0.cols);
  const double decay = 1.0 - dt / 2.0;
  if (h0.is_complex()) {
    Eigen::MatrixXcd h = h0.complex();
    const double part = amp / std::sqrt(2.0);
    for (int s = 0; s < steps; ++s) {
      h *= decay;
      for (int i = 0; i < h.rows(); ++i) {
        for (int j = 0; j < h.cols(); ++j) {
          const double re = normal(engine);
          const double im = normal(engine);
          h(i, j) += cplx(part * re, part * im);
        }
      }
    }
    return make_sample(std::move(h), rng);
  }
  Eigen::MatrixXd h = h0.real();
  for (int s = 0; s < steps; ++s) {
    h *= decay;
    for (int i = 0; i < h.rows(); ++i) {
      for (int j = 0; j < h.cols(); ++j) h(i, j) += amp * normal(engine);
    }
  }
  return make_sample(std::move(h), rng);
}

// ---------------------------------------------------------------- DBM state

DbmState DbmState::from_spectrum(const SymmetrizedSpectrum& spec, double t) {
  DbmState st;
  st.s.assign(spec.positive().begin(), spec.positive().end());
  st.t = t;
  if (!st.ordered()) {
    throw std::invalid_argument("DBM initial data needs distinct singular values");
  }
  return st;
}

bool DbmState::ordered() const {
  if (s.empty()) return false;
  if (!std::isfinite(s.front())) return false;
  double prev = std::abs(s.front());
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i] > prev) || !std::isfinite(s[i])) return false;
    prev = s[i];
  }
  return true;
}

double DbmState::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  double prev = std::abs(s.front());
  for (std::size_t i = 1; i < s.size(); ++i) {
    gap = std::min(gap, s[i] - prev);
    prev = s[i];
  }
  return gap;
}

std::vector<double> DbmState::full() const { return mirror_signed(s); }

SymmetrizedSpectrum DbmState::spectrum() const {
  std::vector<double> v = s;
  v.front() = std::abs(v.front());
  return SymmetrizedSpectrum(std::move(v));
}

std::vector<double> Trajectory::full(std::size_t i) const { return mirror_signed(positive.at(i)); }

std::vector<double> dbm_drift(const DbmState& state) {
  const int n = state.n();
  const auto full = state.full();
  const std::span<const double> view(full);
  std::vector<double> out(static_cast<std::size_t>(n));
  const double inv_2n = 1.0 / (2.0 * n);
  for (int i = 0; i < n; ++i) {
    const double x = state.s[static_cast<std::size_t>(i)];
    const int slot = n + i;
    out[static_cast<std::size_t>(i)] =
        inv_2n * sum_excluding_pair(view, slot, mirror_slot(slot, n), [x](std::span<const double> v) {
          return kernels::inverse_sum(x, v);
        });
  }
  return out;
}

DbmState dbm_step_explicit(const DbmState& state, double dt, std::span<const double> dw) {
  if (!(dt > 0.0)) throw std::invalid_argument("dbm_step needs dt > 0");
  const int n = state.n();
  if (!dw.empty() && static_cast<int>(dw.size()) != n) {
    throw std::invalid_argument("dbm_step: noise vector has the wrong length");
  }
  const auto drift = dbm_drift(state);
  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(n));
  DbmState next;
  next.s.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    double v = state.s[u] + (-0.5 * state.s[u] + drift[u]) * dt;
    if (!dw.empty()) v += noise_scale * dw[u];
    next.s[u] = v;
  }
  next.t = state.t + dt;
  next.dt_used = dt;
  if (!next.ordered()) {
    throw std::runtime_error("DBM ordering violated after a step of size " + std::to_string(dt) +
                             "; use a smaller dt");
  }
  return next;
}

namespace {

// Minimizes, over the chamber |x_1| < x_2 < ... < x_N,
//   J(x) = (2N/dt) [ |x - y|^2/2 + dt |x|^2/4 ] - sum_{k<l} [log(x_l - x_k) + log(x_l + x_k)],
// whose stationarity condition is the implicit step. J is self-concordant,
// so the damped step 1/(1 + lambda) stays feasible and converges globally.
// Returns the iteration count, or -1 on failure.
constexpr int kUndampedIterations = 20;

int implicit_solve(std::vector<double>& x, std::span<const double> y, double dt, int max_newton) {
  const int n = static_cast<int>(x.size());
  const double scale = 2.0 * n / dt;
  const double diag_base = scale * (1.0 + 0.5 * dt);
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd grad(n);
  Eigen::LLT<Eigen::MatrixXd> llt;
  DbmState probe;
  for (int it = 1; it <= max_newton; ++it) {
    for (int k = 0; k < n; ++k) {
      grad[k] = diag_base * x[static_cast<std::size_t>(k)] - scale * y[static_cast<std::size_t>(k)];
      hess(k, k) = diag_base;
    }
    for (int k = 0; k < n; ++k) {
      const double xk = x[static_cast<std::size_t>(k)];
      for (int l = k + 1; l < n; ++l) {
        const double xl = x[static_cast<std::size_t>(l)];
        const double dm = 1.0 / (xl - xk);
        const double dp = 1.0 / (xl + xk);
        grad[k] += dm - dp;
        grad[l] -= dm + dp;
        const double wm = dm * dm;
        const double wp = dp * dp;
        hess(k, k) += wm + wp;
        hess(l, l) += wm + wp;
        hess(l, k) = wp - wm;
      }
    }
    llt.compute(hess);
    if (llt.info() != Eigen::Success) return -1;
    const Eigen::VectorXd step = llt.solve(grad);
    const double decrement = std::sqrt(std::max(0.0, grad.dot(step)));
    if (!std::isfinite(decrement)) return -1;
    // Full steps, shortened only to stay in the chamber; after
    // kUndampedIterations the guaranteed damped rule takes over.
    const bool damped = it > kUndampedIterations && decrement > 0.25;
    double alpha = damped ? 1.0 / (1.0 + decrement) : 1.0;
    probe.s.resize(x.size());
    for (int tries = 0;; ++tries) {
      for (int k = 0; k < n; ++k) {
        probe.s[static_cast<std::size_t>(k)] = x[static_cast<std::size_t>(k)] - alpha * step[k];
      }
      if (probe.ordered()) break;
      if (damped || tries > 60) return -1;
      alpha *= 0.5;
    }
    x.swap(probe.s);
    if (decrement < 1e-9) return it;
  }
  return -1;
}

}  // namespace

DbmState dbm_step(const DbmState& state, double dt, std::span<const double> dw, int max_newton,
                  std::uint64_t* newton_iterations) {
  if (!(dt > 0.0)) throw std::invalid_argument("dbm_step needs dt > 0");
  const int n = state.n();
  if (!dw.empty() && static_cast<int>(dw.size()) != n) {
    throw std::invalid_argument("dbm_step: noise vector has the wrong length");
  }
  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> y = state.s;
  if (!dw.empty()) {
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += noise_scale * dw[static_cast<std::size_t>(i)];
  }
  // Start from the explicit step when it lands in the chamber.
  DbmState next;
  next.s = y;
  const auto drift = dbm_drift(state);
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    next.s[u] += (-0.5 * state.s[u] + drift[u]) * dt;
  }
  if (!next.ordered()) next.s = state.s;
  const int iters = implicit_solve(next.s, y, dt, max_newton);
  if (iters < 0) {
    throw std::runtime_error("implicit DBM step did not converge (dt = " + std::to_string(dt) +
                             ", t = " + std::to_string(state.t) + ")");
  }
  if (newton_iterations) *newton_iterations += static_cast<std::uint64_t>(iters);
  next.t = state.t + dt;
  next.dt_used = dt;
  return next;
}

DbmState dbm_step(const DbmState& state, double dt, const RngStreamSpec& rng, bool noise) {
  std::vector<double> dw;
  if (noise) {
    Engine engine = make_engine(rng);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    dw.resize(state.s.size());
    for (double& w : dw) w = normal(engine);
  }
  return dbm_step(state, dt, dw);
}

namespace {

struct Evolver {
  std::span<DbmState> systems;
  const DbmOptions& opts;
  Engine& engine;
  const StepObserver& on_step;
  DbmStats stats;
  std::normal_distribution<double> normal{0.0, 1.0};
  std::vector<DbmState> trial;

  bool try_step(double h, std::span<const double> dw) {
    trial.clear();
    try {
      for (const auto& st : systems) {
        trial.push_back(dbm_step(st, h, dw, opts.max_newton, &stats.newton_iterations));
      }
    } catch (const std::runtime_error&) {
      return false;
    }
    for (std::size_t k = 0; k < systems.size(); ++k) systems[k] = std::move(trial[k]);
    ++stats.accepted;
    stats.smallest_dt = stats.smallest_dt == 0.0 ? h : std::min(stats.smallest_dt, h);
    if (on_step) on_step(systems);
    return true;
  }

  void advance(double h, std::span<const double> dw, int halvings) {
    if (try_step(h, dw)) return;
    ++stats.rejected;
    if (halvings >= opts.max_halvings) {
      throw std::runtime_error("DBM step failed after " + std::to_string(opts.max_halvings) +
                               " halvings at t = " + std::to_string(systems[0].t));
    }
    std::vector<double> first;
    std::vector<double> second;
    if (!dw.empty()) {
      // Brownian bridge midpoint: W(h/2) | W(h) ~ N(W(h)/2, h/4).
      const double sd = 0.5 * std::sqrt(h);
      first.resize(dw.size());
      second.resize(dw.size());
      for (std::size_t i = 0; i < dw.size(); ++i) {
        first[i] = 0.5 * dw[i] + sd * normal(engine);
        second[i] = dw[i] - first[i];
      }
    }
    advance(h / 2.0, first, halvings + 1);
    advance(h / 2.0, second, halvings + 1);
  }
};

}  // namespace

DbmStats dbm_evolve(std::span<DbmState> systems, double t_end, const DbmOptions& opts,
                    Engine& engine, const StepObserver& on_step) {
  if (systems.empty()) return {};
  if (!(opts.dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
  if (opts.max_newton < 1) throw std::invalid_argument("max_newton must be positive");
  const int n = systems[0].n();
  for (const auto& st : systems) {
    if (st.n() != n || st.t != systems[0].t) {
      throw std::invalid_argument("coupled systems must share N and the current time");
    }
    if (!st.ordered()) throw std::invalid_argument("DBM state violates the ordering invariant");
  }
  Evolver ev{systems, opts, engine, on_step, {}, {}, {}};
  const double tol = 1e-12 * std::max(1.0, std::abs(t_end));
  std::vector<double> dw(opts.noise ? static_cast<std::size_t>(n) : 0);
  while (t_end - systems[0].t > tol) {
    const double h = std::min(opts.dt_max, t_end - systems[0].t);
    const double sd = std::sqrt(h);
    for (double& w : dw) w = sd * ev.normal(engine);
    ev.advance(h, dw, 0);
  }
  for (auto& st : systems) st.t = std::max(st.t, t_end);
  return ev.stats;
}

Trajectory dbm_trajectory(std::span<DbmState> systems, double t_end, double snapshot_dt,
                          const DbmOptions& opts, Engine& engine, DbmStats* stats) {
  Trajectory traj;
  auto record = [&traj](const DbmState& st) {
    traj.times.push_back(st.t);
    traj.positive.push_back(st.s);
  };
  record(systems[0]);
  DbmStats total;
  auto merge = [&total](const DbmStats& s) {
    total.accepted += s.accepted;
    total.rejected += s.rejected;
    total.newton_iterations += s.newton_iterations;
    if (s.smallest_dt > 0.0) {
      total.smallest_dt =
          total.smallest_dt == 0.0 ? s.smallest_dt : std::min(total.smallest_dt, s.smallest_dt);
    }
  };
  if (snapshot_dt <= 0.0) {
    merge(dbm_evolve(systems, t_end, opts, engine,
                     [&](std::span<const DbmState> sys) { record(sys[0]); }));
    if (traj.times.back() != systems[0].t) record(systems[0]);
  } else {
    const double t0 = systems[0].t;
    for (int j = 1;; ++j) {
      const double target = std::min(t0 + j * snapshot_dt, t_end);
      merge(dbm_evolve(systems, target, opts, engine));
      record(systems[0]);
      if (target >= t_end) break;
    }
  }
  if (stats) *stats = total;
  return traj;
}

double CoupledSnapshot::max_gap() const {
  double m = std::abs(sigma1_gap());
  for (std::size_t i = 1; i < h.s.size(); ++i) m = std::max(m, std::abs(h.s[i] - g.s[i]));
  return m;
}

std::vector<CoupledSnapshot> coupled_dbm(const MatrixSample& h, const MatrixSample& g,
                                         std::span<const double> t_grid, const DbmOptions& opts,
                                         const RngStreamSpec& rng, DbmStats* stats) {
  if (h.rows != h.cols || g.rows != g.cols || h.cols != g.cols) {
    throw std::invalid_argument("coupled_dbm needs square inputs of the same size");
  }
  check_time_grid(t_grid);
  std::vector<DbmState> sys{
      DbmState::from_spectrum(SymmetrizedSpectrum(singular_values(h))),
      DbmState::from_spectrum(SymmetrizedSpectrum(singular_values(g)))};
  Engine engine = make_engine(rng);
  std::vector<CoupledSnapshot> out;
  DbmStats total;
  for (double t : t_grid) {
    const DbmStats s = dbm_evolve(sys, t, opts, engine);
    total.accepted += s.accepted;
    total.rejected += s.rejected;
    total.newton_iterations += s.newton_iterations;
    if (s.smallest_dt > 0.0) {
      total.smallest_dt =
          total.smallest_dt == 0.0 ? s.smallest_dt : std::min(total.smallest_dt, s.smallest_dt);
    }
    out.push_back({t, sys[0], sys[1]});
  }
  if (stats) *stats = total;
  return out;
}

// ------------------------------------------------------ parabolic equation

std::vector<double> parabolic_action(std::span<const double> full_s, std::span<const double> v) {
  const int dim = static_cast<int>(full_s.size());
  if (dim % 2 != 0 || v.size() != full_s.size()) {
    throw std::invalid_argument("parabolic_action needs matching 2N-vectors");
  }
  const int n = dim / 2;
  const double inv_2n = 1.0 / (2.0 * n);
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (int slot = 0; slot < dim; ++slot) {
    const int other = mirror_slot(slot, n);
    const int lo = std::min(slot, other);
    const int hi = std::max(slot, other);
    const double x = full_s[static_cast<std::size_t>(slot)];
    const double fx = v[static_cast<std::size_t>(slot)];
    auto part = [&](int a, int len) {
      return kernels::coupling_sum(x, fx, full_s.subspan(a, len), v.subspan(a, len));
    };
    out[static_cast<std::size_t>(slot)] =
        inv_2n * (part(0, lo) + part(lo + 1, hi - lo - 1) + part(hi + 1, dim - hi - 1));
  }
  return out;
}

double parabolic_stiffness(std::span<const double> full_s) {
  const int dim = static_cast<int>(full_s.size());
  const int n = dim / 2;
  double worst = 0.0;
  for (int slot = 0; slot < dim; ++slot) {
    const double x = full_s[static_cast<std::size_t>(slot)];
    const double row = sum_excluding_pair(full_s, slot, mirror_slot(slot, n),
                                          [x](std::span<const double> v) {
                                            return kernels::coupling_weight(x, v);
                                          });
    worst = std::max(worst, row);
  }
  return worst / (2.0 * n);
}

std::vector<double> evolve_phi(std::span<const double> initial, const Trajectory& trajectory,
                               double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("evolve_phi needs dt > 0");
  if (trajectory.size() == 0) throw std::invalid_argument("evolve_phi needs a trajectory");
  if (initial.size() != 2 * static_cast<std::size_t>(trajectory.n())) {
    throw std::invalid_argument("evolve_phi: initial vector must have 2N entries");
  }
  check_time_grid(trajectory.times);
  std::vector<double> phi(initial.begin(), initial.end());
  for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
    const double span = trajectory.times[i + 1] - trajectory.times[i];
    if (span <= 0.0) continue;
    const auto substeps = static_cast<long long>(std::ceil(span / dt - 1e-12));
    const double h = span / static_cast<double>(substeps);
    const auto full = trajectory.full(i);
    const double stiff = parabolic_stiffness(full);
    if (h * stiff > 1.0) {
      throw std::invalid_argument("evolve_phi: dt " + std::to_string(h) +
                                  " exceeds the stability bound " + std::to_string(1.0 / stiff) +
                                  " at t = " + std::to_string(trajectory.times[i]));
    }
    for (long long s = 0; s < substeps; ++s) {
      const auto rate = parabolic_action(full, phi);
      for (std::size_t k = 0; k < phi.size(); ++k) phi[k] += h * rate[k];
    }
  }
  return phi;
}

CouplingRun run_coupling(const SingularSpectrum& sigma_h, const SingularSpectrum& sigma_g,
                         double nu, double t_end, const CouplingOptions& opts,
                         const RngStreamSpec& rng) {
  if (sigma_h.size() != sigma_g.size() || sigma_h.size() < 1) {
    throw std::invalid_argument("run_coupling needs spectra of the same size");
  }
  if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("nu must lie in [0, 1]");
  if (!(t_end >= 0.0)) throw std::invalid_argument("run_coupling needs t_end >= 0");
  if (!(opts.dnu > 0.0)) throw std::invalid_argument("dnu must be positive");
  const int n = sigma_h.size();
  const auto nsz = static_cast<std::size_t>(n);

  auto interpolated = [&](double mu) {
    DbmState st;
    st.s.resize(nsz);
    for (std::size_t i = 0; i < nsz; ++i) {
      st.s[i] = (1.0 - mu) * sigma_h.values[i] + mu * sigma_g.values[i];
    }
    if (!st.ordered()) throw std::invalid_argument("interpolated initial data is not ordered");
    return st;
  };
  // Forward difference unless nu + dnu leaves [0, 1].
  const double nu_b = nu + opts.dnu <= 1.0 ? nu + opts.dnu : nu - opts.dnu;

  CouplingRun run;
  run.initial.nu = nu;
  run.initial.s = interpolated(nu);
  std::vector<double> diff(nsz);
  for (std::size_t i = 0; i < nsz; ++i) diff[i] = sigma_g.values[i] - sigma_h.values[i];
  run.initial.phi = mirror_signed(diff);
  run.initial.psi.resize(run.initial.phi.size());
  std::transform(run.initial.phi.begin(), run.initial.phi.end(), run.initial.psi.begin(),
                 [](double v) { return std::abs(v); });

  std::vector<DbmState> sys{run.initial.s, interpolated(nu_b)};
  Engine engine = make_engine(rng);
  run.trajectory = dbm_trajectory(sys, t_end, opts.snapshot_dt, opts.dbm, engine, &run.stats);

  double stiff = 0.0;
  for (std::size_t i = 0; i + 1 < run.trajectory.size(); ++i) {
    stiff = std::max(stiff, parabolic_stiffness(run.trajectory.full(i)));
  }
  const double dt = stiff > 0.0 ? std::min(opts.phi_dt, 0.9 / stiff) : opts.phi_dt;

  run.final.nu = nu;
  run.final.t = t_end;
  run.final.s = sys[0];
  run.final.phi = evolve_phi(run.initial.phi, run.trajectory, dt);
  run.final.psi = evolve_phi(run.initial.psi, run.trajectory, dt);

  const double scale = std::exp(t_end / 2.0) / (nu_b - nu);
  std::vector<double> fd(nsz);
  for (std::size_t i = 0; i < nsz; ++i) fd[i] = scale * (sys[1].s[i] - sys[0].s[i]);
  run.phi_finite_difference = mirror_signed(fd);
  return run;
}

WeightedStieltjesSample weighted_stieltjes(const CouplingState& state, cplx z) {
  const auto full = state.s.full();
  if (z.imag() == 0.0) {
    for (double s : full) {
      if (s == z.real()) throw std::invalid_argument("z collides with a DBM particle");
    }
  }
  const double damp = std::exp(-state.t / 2.0);
  WeightedStieltjesSample out;
  out.z = z;
  out.t = state.t;
  out.value_phi = damp * kernels::stieltjes_sum(z, full, state.phi);
  out.value_psi = damp * kernels::stieltjes_sum(z, full, state.psi);
  return out;
}

double advection_transport_check(const CouplingRun& run, cplx z) {
  const double t = run.final.t - run.initial.t;
  const cplx later = weighted_stieltjes(run.final, z).value_psi;
  const cplx transported = weighted_stieltjes(run.initial, characteristic(z, t)).value_psi;
  return std::abs(later - transported);
}

cplx m_sc_quadrature(cplx z, int nodes) {
  if (nodes < 8) throw std::invalid_argument("m_sc_quadrature needs at least 8 nodes");
  // x = 2 sin(theta) turns rho_sc(x) dx into (2/pi) cos^2(theta) d theta; the
  // integrand is then smooth and periodic, so the trapezoid rule converges
  // geometrically.
  cplx acc = 0.0;
  const double step = 2.0 * std::numbers::pi / nodes;
  for (int j = 0; j < nodes; ++j) {
    const double th = step * j;
    const double c = std::cos(th);
    acc += c * c / (2.0 * std::sin(th) - z);
  }
  return 2.0 * acc / static_cast<double>(nodes);
}

double continuum_transport_residual(cplx z, double t, int nodes) {
  const cplx target = m_sc_quadrature(characteristic(z, t), nodes);
  return std::abs(std::exp(-t / 2.0) * m_sc_quadrature(z, nodes) - target) / std::abs(target);
}

// --------------------------------------------------------- phi approximant

double HatPhi::at(int k) const {
  const auto it = std::find(labels.begin(), labels.end(), k);
  if (it == labels.end()) throw std::out_of_range("label outside the bulk window");
  return values[static_cast<std::size_t>(it - labels.begin())];
}

HatPhi hat_phi(const SingularSpectrum& sigma_h, const SingularSpectrum& sigma_g,
               const TypicalLocations& gammas, double t, double bulk_c) {
  const int n = sigma_h.size();
  if (sigma_g.size() != n || gammas.n != n) {
    throw std::invalid_argument("hat_phi: spectra and quantiles must share N");
  }
  if (!(t >= 1e-3 && t <= 1.0)) throw std::invalid_argument("hat_phi needs t in [1e-3, 1]");
  if (!(bulk_c > 0.0 && bulk_c <= 0.5)) throw std::invalid_argument("bulk_c must lie in (0, 1/2]");
  const int kmax = static_cast<int>(std::floor((1.0 - bulk_c) * n));

  std::vector<double> positive(static_cast<std::size_t>(kmax));
  for (int k = 1; k <= kmax; ++k) {
    const cplx w = characteristic(cplx(gammas.at(k), 1e-9), t);
    const double im_m = m_sc(w).imag();
    if (im_m < 1e-6) {
      throw std::domain_error("Im m_sc at the transported quantile is below 1e-6 for k = " +
                              std::to_string(k));
    }
    double acc = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double d = sigma_h.values[static_cast<std::size_t>(j - 1)] -
                       sigma_g.values[static_cast<std::size_t>(j - 1)];
      const double g = gammas.at(j);
      acc += (1.0 / (g - w)).imag() * d - (1.0 / (-g - w)).imag() * d;
    }
    positive[static_cast<std::size_t>(k - 1)] = acc / (2.0 * n * im_m);
  }
  HatPhi out;
  out.t = t;
  for (int k = -kmax; k <= kmax; ++k) {
    if (k == 0) continue;
    out.labels.push_back(k);
    const double v = positive[static_cast<std::size_t>(std::abs(k) - 1)];
    out.values.push_back(k > 0 ? v : -v);
  }
  return out;
}

// ---------------------------------------------------- short-range kernel

KernelOperator::KernelOperator(std::span<const double> full_s) {
  if (full_s.empty() || full_s.size() % 2 != 0) {
    throw std::invalid_argument("KernelOperator needs a 2N-vector");
  }
  n_ = static_cast<int>(full_s.size() / 2);
  const int d = dim();
  c_.assign(static_cast<std::size_t>(d) * d, 0.0);
  const double inv_2n = 1.0 / (2.0 * n_);
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < d; ++k) {
      if (j == k || j == mirror_slot(k, n_)) continue;
      const double gap = full_s[static_cast<std::size_t>(j)] - full_s[static_cast<std::size_t>(k)];
      c_[static_cast<std::size_t>(j) * d + k] = inv_2n / (gap * gap);
    }
  }
}

double KernelOperator::coefficient(int slot_j, int slot_k) const {
  return c_.at(static_cast<std::size_t>(slot_j) * dim() + slot_k);
}

std::vector<double> KernelOperator::apply(std::span<const double> v) const {
  const int d = dim();
  if (static_cast<int>(v.size()) != d) throw std::invalid_argument("KernelOperator: size mismatch");
  std::vector<double> out(static_cast<std::size_t>(d), 0.0);
  for (int k = 0; k < d; ++k) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = c_[static_cast<std::size_t>(j) * d + k];
      if (c != 0.0) acc += c * (v[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(k)]);
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

double KernelOperator::max_row_sum() const {
  const int d = dim();
  double worst = 0.0;
  for (int k = 0; k < d; ++k) {
    double row = 0.0;
    for (int j = 0; j < d; ++j) row += c_[static_cast<std::size_t>(j) * d + k];
    worst = std::max(worst, row);
  }
  return worst;
}

std::size_t KernelOperator::nonzeros() const {
  return static_cast<std::size_t>(std::count_if(c_.begin(), c_.end(), [](double c) { return c != 0.0; }));
}

std::pair<KernelOperator, KernelOperator> split_kernel(const KernelOperator& k, int l) {
  if (l < 1) throw std::invalid_argument("split_kernel needs a cutoff l >= 1");
  KernelOperator near = k;
  KernelOperator far = k;
  near.cutoff_ = l;
  const int d = k.dim();
  for (int a = 0; a < d; ++a) {
    for (int b = 0; b < d; ++b) {
      const int dist = std::abs(slot_to_label(a, k.n_) - slot_to_label(b, k.n_));
      const auto idx = static_cast<std::size_t>(a) * d + b;
      (dist <= l ? far : near).c_[idx] = 0.0;
    }
  }
  return {std::move(near), std::move(far)};
}

std::vector<double> short_range_propagator(const Trajectory& trajectory, int l, double u,
                                           double v, int label_k, std::optional<double> dt) {
  const int n = trajectory.n();
  if (n == 0) throw std::invalid_argument("short_range_propagator needs a trajectory");
  if (!(u <= v)) throw std::invalid_argument("short_range_propagator needs u <= v");
  if (l < 1) throw std::invalid_argument("short-range cutoff must be >= 1");
  if (static_cast<double>(l) < n * (v - u)) {
    throw std::invalid_argument("short_range_propagator needs l >= N (v - u)");
  }
  if (u < trajectory.times.front() || v > trajectory.times.back() * (1.0 + 1e-12)) {
    throw std::invalid_argument("[u, v] is not covered by the trajectory");
  }
  if (label_k == 0 || std::abs(label_k) > n) throw std::out_of_range("label out of range");
  if (dt && !(*dt > 0.0)) throw std::invalid_argument("dt must be positive");

  const int d = 2 * n;
  std::vector<double> w(static_cast<std::size_t>(d), 0.0);
  w[static_cast<std::size_t>(label_to_slot(label_k, n))] = 1.0;
  if (u == v) return w;

  const double inv_2n = 1.0 / (2.0 * n);
  std::vector<int> labels(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) labels[static_cast<std::size_t>(a)] = slot_to_label(a, n);

  // Sparse rows of the short-range generator, rebuilt per snapshot.
  std::vector<double> next(w.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const double t0 = std::max(u, trajectory.times[i]);
    const double t1 = i + 1 < trajectory.size() ? std::min(v, trajectory.times[i + 1]) : v;
    if (t1 <= t0) continue;
    const auto full = trajectory.full(i);
    std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(d));
    double worst = 0.0;
    for (int a = 0; a < d; ++a) {
      double row = 0.0;
      for (int b = 0; b < d; ++b) {
        if (b == a || b == mirror_slot(a, n)) continue;
        if (std::abs(labels[static_cast<std::size_t>(a)] - labels[static_cast<std::size_t>(b)]) > l) {
          continue;
        }
        const double gap = full[static_cast<std::size_t>(a)] - full[static_cast<std::size_t>(b)];
        const double c = inv_2n / (gap * gap);
        rows[static_cast<std::size_t>(a)].emplace_back(b, c);
        row += c;
      }
      worst = std::max(worst, row);
    }
    const double span = t1 - t0;
    double h = 0.0;
    long long substeps = 0;
    if (dt) {
      substeps = static_cast<long long>(std::ceil(span / *dt - 1e-12));
      h = span / static_cast<double>(substeps);
      if (h * worst > 1.0) {
        throw std::invalid_argument("short_range_propagator: dt exceeds the stability bound");
      }
    } else {
      substeps = std::max(1LL, static_cast<long long>(std::ceil(span * worst / 0.9)));
      h = span / static_cast<double>(substeps);
    }
    for (long long s = 0; s < substeps; ++s) {
      for (int a = 0; a < d; ++a) {
        const double wa = w[static_cast<std::size_t>(a)];
        double acc = 0.0;
        for (const auto& [b, c] : rows[static_cast<std::size_t>(a)]) {
          acc += c * (w[static_cast<std::size_t>(b)] - wa);
        }
        next[static_cast<std::size_t>(a)] = wa + h * acc;
      }
      w.swap(next);
    }
  }
  return w;
}

// ------------------------------------------------------------- checkpoints

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const auto old = out.precision(17);
  out << "t,k,s_k\n";
  const int n = trajectory.n();
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto full = trajectory.full(i);
    for (int slot = 0; slot < 2 * n; ++slot) {
      out << trajectory.times[i] << ',' << slot_to_label(slot, n) << ','
          << full[static_cast<std::size_t>(slot)] << '\n';
    }
  }
  out.precision(old);
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  std::getline(in, line);
  Trajectory traj;
  std::map<int, double> current;
  double current_t = std::numeric_limits<double>::quiet_NaN();
  auto flush = [&] {
    if (current.empty()) return;
    std::vector<double> pos;
    for (const auto& [k, s] : current) {
      if (k > 0) pos.push_back(s);
    }
    traj.times.push_back(current_t);
    traj.positive.push_back(std::move(pos));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double t = 0.0;
    int k = 0;
    double s = 0.0;
    char c1 = 0;
    char c2 = 0;
    row >> t >> c1 >> k >> c2 >> s;
    if (!row || c1 != ',' || c2 != ',') throw std::invalid_argument("malformed trajectory row: " + line);
    if (t != current_t) {
      flush();
      current_t = t;
    }
    current[k] = s;
  }
  flush();
  return traj;
}

void write_coupling_csv(std::ostream& out, const CouplingState& state) {
  const auto old = out.precision(17);
  out << "t,k,phi_k,psi_k\n";
  const int n = state.s.n();
  for (int slot = 0; slot < 2 * n; ++slot) {
    out << state.t << ',' << slot_to_label(slot, n) << ',' << state.phi[static_cast<std::size_t>(slot)]
        << ',' << state.psi[static_cast<std::size_t>(slot)] << '\n';
  }
  out.precision(old);
}

}  // namespace hardedge
