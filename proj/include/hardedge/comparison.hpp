#pragma once

#include <span>
#include <vector>

#include "hardedge/ensembles.hpp"
#include "hardedge/rng.hpp"
#include "hardedge/spectra.hpp"

namespace hardedge {

/// Symmetric plateau function, non-increasing in |x|: 1 for |x| <= P, 0 for
/// |x| >= Q = P + rho, with a quintic smoothstep in between.
///   f1:        P = r/N - rho, Q = r/N
///   f2:        P = r/N,       Q = r/N + rho
///   centered:  P = E - rho,   Q = E
struct TestFunctionSpec {
  enum class Variant { F1, F2, Centered };

  int n = 1;
  double r = 1.0;
  double rho = 0.0;
  double a = 1.5;
  Variant variant = Variant::F1;
  double center = 0.0;  // E, centered variant only

  double plateau_edge() const;
  double outer_edge() const;
};

TestFunctionSpec make_f1(int n, double r, double rho, double a);
TestFunctionSpec make_f2(int n, double r, double rho, double a);
TestFunctionSpec make_centered(int n, double center, double rho, double a);

/// Throws std::invalid_argument unless a in (1, 2), rho in [N^-a, N^-1] and
/// the plateau edge is non-negative.
void validate(const TestFunctionSpec& spec);

/// 6u^5 - 15u^4 + 10u^3 and its first two derivatives.
double smoothstep(double u);
double smoothstep_d1(double u);
double smoothstep_d2(double u);

/// Outer function: 1 - smoothstep(clamp(x, 0, 1)).
double outer_F(double x);

struct TestFunctionValue {
  double f = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

double eval_test_function(const TestFunctionSpec& spec, double x);
TestFunctionValue eval_test_function_derivatives(const TestFunctionSpec& spec, double x);

/// sum over k in {-N..-1, 1..N} of f(s_k).
double trace_f(const TestFunctionSpec& spec, const SymmetrizedSpectrum& spectrum);

struct SandwichResult {
  double lhs = 0.0;        // F(Tr f2)
  double indicator = 0.0;  // 1{sigma_1 > r/N}
  double rhs = 0.0;        // F(Tr f1)
};

/// Throws std::logic_error, listing the spectrum near zero, if
/// lhs <= indicator <= rhs fails.
SandwichResult sandwich_check(const MatrixSample& h, double r, double rho, double a = 1.5);
SandwichResult sandwich_check(const SingularSpectrum& sigma, double r, double rho, double a = 1.5);

struct HsGrid {
  int nx = 2000;  // midpoints across [-Q, Q]
  int ny = 400;   // midpoints across (0, 2 N^-a]
};

/// Trace of f over the Girko symmetrization by two-dimensional quadrature of
/// the Helffer-Sjostrand representation. The y-range below 1e-8 is dropped.
/// Throws std::invalid_argument if either grid step exceeds rho / 10.
double hs_trace(const TestFunctionSpec& spec, const MatrixSample& h, const HsGrid& grid);
double hs_trace(const TestFunctionSpec& spec, std::span<const double> eigenvalues,
                const HsGrid& grid);

/// Smooth symmetric cutoff: 1 on |y| <= N^-a, 0 on |y| >= 2 N^-a.
double hs_cutoff(double y, double n_pow_a);
double hs_cutoff_d1(double y, double n_pow_a);

struct BudgetParams {
  int n = 1;
  double rho = 0.0;
  double a = 1.5;
  double t = 0.0;
  double eps = 0.0;
  double c = 1.0;
};

/// N^{C eps} (1/(rho N^2) + (rho N^a)^5 / sqrt(N) + t rho N^a).
double comparison_budget(const BudgetParams& p);

struct LindebergTrial {
  int trial = 0;
  double trace_x = 0.0;
  double trace_y = 0.0;
  double f_x = 0.0;
  double f_y = 0.0;
};

struct LindebergResult {
  double delta_hat = 0.0;  // |mean F_x - mean F_y|
  double signed_delta = 0.0;
  double std_error = 0.0;
  double t = 0.0;  // fourth-moment gap
  double budget = 0.0;
  double c = 1.0;
  double eps = 0.0;
  std::vector<LindebergTrial> trials;
};

/// Samples `trials` independent pairs (X, Y) and compares E F(Tr f).
/// Throws std::invalid_argument if the first three moments differ.
LindebergResult lindeberg_swap_experiment(const EntryLaw& law_x, const EntryLaw& law_y, int n,
                                          const TestFunctionSpec& spec, int trials,
                                          const RngStreamSpec& rng, double eps = 0.0,
                                          double c = 1.0, int threads = 1);

}  // namespace hardedge
