#include "hardedge/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hardedge/kernels.hpp"
#include "hardedge/linalg.hpp"
#include "hardedge/parallel.hpp"

namespace hardedge {

namespace {

constexpr double kRelTol = 1e-12;

TestFunctionSpec make_spec(int n, double r, double rho, double a, TestFunctionSpec::Variant v,
                           double center) {
  TestFunctionSpec s;
  s.n = n;
  s.r = r;
  s.rho = rho;
  s.a = a;
  s.variant = v;
  s.center = center;
  validate(s);
  return s;
}

}  // namespace

double TestFunctionSpec::plateau_edge() const {
  switch (variant) {
    case Variant::F1: return r / n - rho;
    case Variant::F2: return r / n;
    case Variant::Centered: return center - rho;
  }
  return 0.0;
}

double TestFunctionSpec::outer_edge() const {
  switch (variant) {
    case Variant::F1: return r / n;
    case Variant::F2: return r / n + rho;
    case Variant::Centered: return center;
  }
  return 0.0;
}

TestFunctionSpec make_f1(int n, double r, double rho, double a) {
  return make_spec(n, r, rho, a, TestFunctionSpec::Variant::F1, 0.0);
}

TestFunctionSpec make_f2(int n, double r, double rho, double a) {
  return make_spec(n, r, rho, a, TestFunctionSpec::Variant::F2, 0.0);
}

TestFunctionSpec make_centered(int n, double center, double rho, double a) {
  return make_spec(n, 0.0, rho, a, TestFunctionSpec::Variant::Centered, center);
}

void validate(const TestFunctionSpec& spec) {
  if (spec.n < 1) throw std::invalid_argument("test function needs N >= 1");
  if (!(spec.a > 1.0 && spec.a < 2.0)) throw std::invalid_argument("cutoff exponent a must lie in (1, 2)");
  const double lo = std::pow(static_cast<double>(spec.n), -spec.a);
  const double hi = 1.0 / spec.n;
  if (!(spec.rho >= lo * (1.0 - kRelTol) && spec.rho <= hi * (1.0 + kRelTol))) {
    throw std::invalid_argument("rho = " + std::to_string(spec.rho) + " is outside [N^-a, N^-1]");
  }
  if (spec.variant != TestFunctionSpec::Variant::Centered && !(spec.r > 0.0)) {
    throw std::invalid_argument("threshold r must be positive");
  }
  if (spec.plateau_edge() < 0.0) {
    throw std::invalid_argument("plateau edge is negative; increase r (or E) or shrink rho");
  }
}

double smoothstep(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double smoothstep_d1(double u) { return 30.0 * u * u * (1.0 - u) * (1.0 - u); }
double smoothstep_d2(double u) { return 60.0 * u * (2.0 * u - 1.0) * (u - 1.0); }

double outer_F(double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 1.0) return 0.0;
  return 1.0 - smoothstep(x);
}

TestFunctionValue eval_test_function_derivatives(const TestFunctionSpec& spec, double x) {
  const double ax = std::abs(x);
  const double p = spec.plateau_edge();
  const double q = spec.outer_edge();
  if (ax <= p) return {1.0, 0.0, 0.0};
  if (ax >= q) return {0.0, 0.0, 0.0};
  const double u = std::min((ax - p) / spec.rho, 1.0);
  const double sign = x < 0.0 ? -1.0 : 1.0;
  return {1.0 - smoothstep(u), -sign * smoothstep_d1(u) / spec.rho,
          -smoothstep_d2(u) / (spec.rho * spec.rho)};
}

double eval_test_function(const TestFunctionSpec& spec, double x) {
  return eval_test_function_derivatives(spec, x).f;
}

double trace_f(const TestFunctionSpec& spec, const SymmetrizedSpectrum& spectrum) {
  double acc = 0.0;
  for (double s : spectrum.positive()) acc += eval_test_function(spec, s);
  // f is even, so each pair +-s_k contributes twice.
  return 2.0 * acc;
}

SandwichResult sandwich_check(const SingularSpectrum& sigma, double r, double rho, double a) {
  const int n = sigma.size();
  const SymmetrizedSpectrum spec(sigma);
  SandwichResult out;
  out.lhs = outer_F(trace_f(make_f2(n, r, rho, a), spec));
  out.indicator = sigma.smallest() > r / n ? 1.0 : 0.0;
  out.rhs = outer_F(trace_f(make_f1(n, r, rho, a), spec));
  if (!(out.lhs <= out.indicator && out.indicator <= out.rhs)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "sandwich ordering violated: F(Tr f2) = " << out.lhs << ", indicator = " << out.indicator
        << ", F(Tr f1) = " << out.rhs << "; r/N = " << r / n << ", rho = " << rho
        << "; smallest singular values:";
    for (int k = 0; k < std::min(n, 5); ++k) msg << ' ' << sigma.values[static_cast<std::size_t>(k)];
    throw std::logic_error(msg.str());
  }
  return out;
}

SandwichResult sandwich_check(const MatrixSample& h, double r, double rho, double a) {
  return sandwich_check(singular_values(h), r, rho, a);
}

double hs_cutoff(double y, double n_pow_a) {
  const double inner = 1.0 / n_pow_a;
  const double ay = std::abs(y);
  if (ay <= inner) return 1.0;
  if (ay >= 2.0 * inner) return 0.0;
  return 1.0 - smoothstep((ay - inner) / inner);
}

double hs_cutoff_d1(double y, double n_pow_a) {
  const double inner = 1.0 / n_pow_a;
  const double ay = std::abs(y);
  if (ay <= inner || ay >= 2.0 * inner) return 0.0;
  const double sign = y < 0.0 ? -1.0 : 1.0;
  return -sign * smoothstep_d1((ay - inner) / inner) / inner;
}

double hs_trace(const TestFunctionSpec& spec, std::span<const double> eigenvalues,
                const HsGrid& grid) {
  validate(spec);
  if (grid.nx < 1 || grid.ny < 1) throw std::invalid_argument("HS grid needs positive sizes");
  const double q = spec.outer_edge();
  const double n_pow_a = std::pow(static_cast<double>(spec.n), spec.a);
  const double ymax = 2.0 / n_pow_a;
  const double hx = 2.0 * q / grid.nx;
  const double hy = ymax / grid.ny;
  if (hx > spec.rho / 10.0 || hy > spec.rho / 10.0) {
    const auto nx = static_cast<long long>(std::ceil(20.0 * q / spec.rho));
    const auto ny = static_cast<long long>(std::ceil(20.0 / (n_pow_a * spec.rho)));
    throw std::invalid_argument("HS grid too coarse: need nx >= " + std::to_string(nx) +
                                " and ny >= " + std::to_string(ny));
  }

  std::vector<double> ys;
  std::vector<double> chi;
  std::vector<double> dchi;
  for (int j = 0; j < grid.ny; ++j) {
    const double y = (j + 0.5) * hy;
    if (y < 1e-8) continue;
    ys.push_back(y);
    chi.push_back(hs_cutoff(y, n_pow_a));
    dchi.push_back(hs_cutoff_d1(y, n_pow_a));
  }

  double acc = 0.0;
  for (int i = 0; i < grid.nx; ++i) {
    const double x = -q + (i + 0.5) * hx;
    const TestFunctionValue fv = eval_test_function_derivatives(spec, x);
    if (fv.f == 0.0 && fv.d1 == 0.0 && fv.d2 == 0.0) continue;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      const double y = ys[j];
      if (fv.d2 == 0.0 && dchi[j] == 0.0) continue;
      // g(z) = (1/2pi)[i y f'' chi + i (f + i y f') chi'].
      const cplx g = cplx(0.0, y * fv.d2 * chi[j]) + cplx(0.0, 1.0) * cplx(fv.f, y * fv.d1) * dchi[j];
      const cplx tr = kernels::stieltjes_sum(cplx(x, y), eigenvalues);
      acc += (g * tr).real();
    }
  }
  // The lower half-plane contributes the complex conjugate.
  return acc * hx * hy / std::numbers::pi;
}

double hs_trace(const TestFunctionSpec& spec, const MatrixSample& h, const HsGrid& grid) {
  const auto eig = hermitian_eigenvalues(girko_symmetrize(h));
  return hs_trace(spec, eig, grid);
}

double comparison_budget(const BudgetParams& p) {
  if (p.n < 1) throw std::invalid_argument("budget needs N >= 1");
  if (!(p.a > 1.0 && p.a < 2.0)) throw std::invalid_argument("budget needs a in (1, 2)");
  const double n = p.n;
  const double n_pow_a = std::pow(n, p.a);
  if (!(p.rho >= (1.0 - kRelTol) / n_pow_a && p.rho <= (1.0 + kRelTol) / n)) {
    throw std::invalid_argument("budget needs rho in [N^-a, N^-1]");
  }
  if (!(p.t >= 0.0)) throw std::invalid_argument("budget needs t >= 0");
  if (!(p.eps >= 0.0)) throw std::invalid_argument("budget needs eps >= 0");
  if (!(p.c >= 0.0)) throw std::invalid_argument("budget constant C must be non-negative");
  const double scaled = p.rho * n_pow_a;
  const double base = 1.0 / (p.rho * n * n) + std::pow(scaled, 5.0) / std::sqrt(n) + p.t * scaled;
  return std::pow(n, p.c * p.eps) * base;
}

LindebergResult lindeberg_swap_experiment(const EntryLaw& law_x, const EntryLaw& law_y, int n,
                                          const TestFunctionSpec& spec, int trials,
                                          const RngStreamSpec& rng, double eps, double c,
                                          int threads) {
  validate(law_x);
  validate(law_y);
  validate(spec);
  if (trials < 2) throw std::invalid_argument("lindeberg experiment needs at least 2 trials");
  if (spec.n != n) throw std::invalid_argument("test function N differs from matrix N");
  if (law_x.is_complex() != law_y.is_complex()) {
    throw std::invalid_argument("laws must both be real or both complex");
  }
  for (int k = 0; k < 3; ++k) {
    if (std::abs(law_x.moments[k] - law_y.moments[k]) > 1e-10) {
      throw std::invalid_argument("entry laws differ in moment m" + std::to_string(k + 1));
    }
  }

  LindebergResult out;
  out.t = std::abs(law_x.moments[3] - law_y.moments[3]);
  out.c = c;
  out.eps = eps;
  out.budget = comparison_budget({n, spec.rho, spec.a, out.t, eps, c});
  out.trials.resize(static_cast<std::size_t>(trials));
  parallel_for(trials, threads, [&](int i) {
    const auto id = static_cast<std::uint64_t>(i);
    const auto x = sample_matrix(law_x, n, n, rng.child(2 * id));
    const auto y = sample_matrix(law_y, n, n, rng.child(2 * id + 1));
    LindebergTrial& rec = out.trials[static_cast<std::size_t>(i)];
    rec.trial = i;
    rec.trace_x = trace_f(spec, SymmetrizedSpectrum(singular_values(x)));
    rec.trace_y = trace_f(spec, SymmetrizedSpectrum(singular_values(y)));
    rec.f_x = outer_F(rec.trace_x);
    rec.f_y = outer_F(rec.trace_y);
  });

  double sx = 0.0, sy = 0.0, qx = 0.0, qy = 0.0;
  for (const auto& rec : out.trials) {
    sx += rec.f_x;
    sy += rec.f_y;
    qx += rec.f_x * rec.f_x;
    qy += rec.f_y * rec.f_y;
  }
  const double m = trials;
  const double mx = sx / m;
  const double my = sy / m;
  const double vx = std::max(0.0, (qx - m * mx * mx) / (m - 1.0));
  const double vy = std::max(0.0, (qy - m * my * my) / (m - 1.0));
  out.signed_delta = mx - my;
  out.delta_hat = std::abs(out.signed_delta);
  out.std_error = std::sqrt(vx / m + vy / m);
  return out;
}

}  // namespace hardedge
