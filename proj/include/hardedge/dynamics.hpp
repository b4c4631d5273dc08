#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hardedge/ensembles.hpp"
#include "hardedge/rng.hpp"
#include "hardedge/spectra.hpp"

namespace hardedge {

// ---------------------------------------------------------------- matrix flow

/// e^{-t/2} H + sqrt(1 - e^{-t}) G.
MatrixSample ou_interpolate(const MatrixSample& h, const MatrixSample& g, double t);

/// Euler-Maruyama path of dH = noise_scale N^{-1/2} dB - H/2 dt after `steps`
/// steps. Requires dt <= 1e-2 and dt * steps <= 10.
MatrixSample ou_sde_path(const MatrixSample& h0, double dt, int steps, const RngStreamSpec& rng,
                         double noise_scale = 1.0);

// ------------------------------------------------------- singular-value DBM

/// Positive-index coordinates s_1..s_N of the symmetrized DBM. s_{-k} = -s_k
/// is implied. s_1 carries a sign: the pair (1, -1) does not interact, so s_1
/// may pass through zero, and sigma_1 = |s_1|. The ordering invariant is
/// |s_1| < s_2 < ... < s_N.
struct DbmState {
  std::vector<double> s;
  double t = 0.0;
  double dt_used = 0.0;

  static DbmState from_spectrum(const SymmetrizedSpectrum& spec, double t = 0.0);

  int n() const { return static_cast<int>(s.size()); }
  bool ordered() const;
  /// Smallest gap among |s_1| < s_2 < ... < s_N.
  double min_gap() const;
  /// Values ordered by label -N..-1, 1..N (signed s_1 mirrored).
  std::vector<double> full() const;
  SymmetrizedSpectrum spectrum() const;
  double sigma1() const { return std::abs(s.front()); }
};

/// (1/2N) sum_{l != +-k} 1/(s_k - s_l) for k = 1..N.
std::vector<double> dbm_drift(const DbmState& state);

/// One drift-implicit Euler step driven by standard Brownian increments dw
/// (variance dt each, or empty for the noiseless flow):
///   s' = s + dw / sqrt(N) + dt * b(s'),  b_k = -s_k/2 + (1/2N) sum_{l != +-k} 1/(s_k - s_l).
/// b is the gradient of a concave log-barrier potential, so s' is the unique
/// minimizer of a strictly convex function on the ordered chamber and the
/// ordering holds for every noise draw. Solved by damped Newton; throws
/// std::runtime_error if Newton does not converge within max_newton iterations.
DbmState dbm_step(const DbmState& state, double dt, std::span<const double> dw,
                  int max_newton = 100, std::uint64_t* newton_iterations = nullptr);
DbmState dbm_step(const DbmState& state, double dt, const RngStreamSpec& rng, bool noise);

/// Explicit Euler-Maruyama step, kept as the reference for the small-dt
/// limit. Throws std::runtime_error if the ordering breaks.
DbmState dbm_step_explicit(const DbmState& state, double dt, std::span<const double> dw);

struct DbmOptions {
  double dt_max = 1e-3;
  int max_newton = 100;
  /// Brownian-bridge halvings allowed when a Newton solve fails.
  int max_halvings = 20;
  bool noise = true;
};

struct DbmStats {
  std::uint64_t accepted = 0;
  std::uint64_t rejected = 0;
  std::uint64_t newton_iterations = 0;
  double smallest_dt = 0.0;
};

/// Called after every accepted step.
using StepObserver = std::function<void(std::span<const DbmState>)>;

/// Advances all systems to time t_end with identical Brownian increments.
/// A failed solve is retried on both halves of a Brownian-bridge split, so
/// the driving path is unchanged; throws after opts.max_halvings levels.
DbmStats dbm_evolve(std::span<DbmState> systems, double t_end, const DbmOptions& opts,
                    Engine& engine, const StepObserver& on_step = {});

/// Time-stamped snapshots of the signed coordinates s_1..s_N.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> positive;

  int n() const { return positive.empty() ? 0 : static_cast<int>(positive.front().size()); }
  std::size_t size() const { return times.size(); }
  std::vector<double> full(std::size_t i) const;
};

/// Runs systems[0..] to t_end, recording systems[0] every snapshot_dt, or
/// after every accepted step when snapshot_dt <= 0.
Trajectory dbm_trajectory(std::span<DbmState> systems, double t_end, double snapshot_dt,
                          const DbmOptions& opts, Engine& engine, DbmStats* stats = nullptr);

struct CoupledSnapshot {
  double t = 0.0;
  DbmState h;
  DbmState g;
  /// Signed s_1 difference.
  double sigma1_gap() const { return h.s.front() - g.s.front(); }
  double max_gap() const;
};

/// Two DBMs from sigma(H) and sigma(G) under the same noise, sampled on
/// t_grid (ascending, first point may be 0).
std::vector<CoupledSnapshot> coupled_dbm(const MatrixSample& h, const MatrixSample& g,
                                         std::span<const double> t_grid, const DbmOptions& opts,
                                         const RngStreamSpec& rng, DbmStats* stats = nullptr);

// ------------------------------------------------------ parabolic equation

/// Explicit Euler for d phi_k / dt = (1/2N) sum_{l != +-k} (phi_l - phi_k)/(s_l - s_k)^2
/// with coefficients frozen on each snapshot interval. `initial` is indexed by
/// label slot (size 2N). Each interval is cut into equal substeps no longer
/// than dt; throws std::invalid_argument if a substep times the stiffest row
/// sum exceeds 1.
std::vector<double> evolve_phi(std::span<const double> initial, const Trajectory& trajectory,
                               double dt);

/// Generator action (1/2N) sum_{l != +-k} (v_l - v_k)/(s_l - s_k)^2 for every slot.
std::vector<double> parabolic_action(std::span<const double> full_s, std::span<const double> v);

/// Largest row sum (1/2N) sum_{l != +-k} 1/(s_l - s_k)^2.
double parabolic_stiffness(std::span<const double> full_s);

struct CouplingState {
  double nu = 0.0;
  double t = 0.0;
  DbmState s;
  std::vector<double> phi;  // by label slot
  std::vector<double> psi;  // by label slot
};

struct CouplingOptions {
  DbmOptions dbm;
  double snapshot_dt = 1e-3;
  double phi_dt = 1e-3;
  double dnu = 1e-3;
};

struct CouplingRun {
  CouplingState initial;
  CouplingState final;
  /// e^{t/2} (s^{nu + dnu} - s^{nu}) / dnu at the final time, by label slot.
  std::vector<double> phi_finite_difference;
  Trajectory trajectory;
  DbmStats stats;
};

/// DBM from (1 - nu) sigma(H) + nu sigma(G) with phi(0) = sigma(G) - sigma(H)
/// and psi(0) = |phi(0)|, evolved to t_end.
CouplingRun run_coupling(const SingularSpectrum& sigma_h, const SingularSpectrum& sigma_g,
                         double nu, double t_end, const CouplingOptions& opts,
                         const RngStreamSpec& rng);

struct WeightedStieltjesSample {
  cplx z;
  cplx value_phi;
  cplx value_psi;
  double t = 0.0;
};

/// e^{-t/2} sum_k phi_k / (s_k - z), and the same with psi.
WeightedStieltjesSample weighted_stieltjes(const CouplingState& state, cplx z);

/// |S~_t(z) - S~_0(z_t)| for the psi-weighted transform.
double advection_transport_check(const CouplingRun& run, cplx z);

/// Semicircle Stieltjes transform by periodic trapezoid quadrature.
cplx m_sc_quadrature(cplx z, int nodes = 4096);

/// |e^{-t/2} m(z) - m(z_t)| / |m(z_t)| with m evaluated by quadrature: the
/// transport of a constant weight profile.
double continuum_transport_residual(cplx z, double t, int nodes = 4096);

// --------------------------------------------------------- phi approximant

struct HatPhi {
  std::vector<int> labels;
  std::vector<double> values;
  double t = 0.0;

  double at(int k) const;
};

/// Deterministic approximation of phi_k(t) for |k| <= (1 - bulk_c) N.
HatPhi hat_phi(const SingularSpectrum& sigma_h, const SingularSpectrum& sigma_g,
               const TypicalLocations& gammas, double t, double bulk_c);

// ---------------------------------------------------- short-range kernel

/// Coefficients c_jk = 1/(2N (s_j - s_k)^2) over label slots, j != +-k.
/// Entries with label distance |j - k| > cutoff are dropped (or kept alone
/// for the long-range part).
class KernelOperator {
 public:
  KernelOperator() = default;
  explicit KernelOperator(std::span<const double> full_s);

  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  double coefficient(int slot_j, int slot_k) const;
  std::optional<int> cutoff() const { return cutoff_; }
  /// (K v)_k = sum_j c_jk (v_j - v_k).
  std::vector<double> apply(std::span<const double> v) const;
  double max_row_sum() const;
  std::size_t nonzeros() const;

  friend std::pair<KernelOperator, KernelOperator> split_kernel(const KernelOperator& k, int l);

 private:
  int n_ = 0;
  std::vector<double> c_;  // dense dim x dim
  std::optional<int> cutoff_;
};

std::pair<KernelOperator, KernelOperator> split_kernel(const KernelOperator& k, int l);

/// Short-range flow started from delta_k at time u, integrated to v along the
/// trajectory. With no dt, substeps adapt to 0.9 / max row sum.
std::vector<double> short_range_propagator(const Trajectory& trajectory, int l, double u,
                                           double v, int label_k,
                                           std::optional<double> dt = std::nullopt);

// ------------------------------------------------------------- checkpoints

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
Trajectory read_trajectory_csv(std::istream& in);
void write_coupling_csv(std::ostream& out, const CouplingState& state);

}  // namespace hardedge
