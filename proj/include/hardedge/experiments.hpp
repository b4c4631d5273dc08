#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hardedge/ensembles.hpp"
#include "hardedge/rng.hpp"
#include "hardedge/stats.hpp"

namespace hardedge {

/// Reproducible description of one Monte Carlo run.
///
/// `grid` holds the swept parameter: lambda for smoothed/condition runs, t
/// for coupled relaxation, r for the universality sandwich. `r_grid` holds
/// the thresholds of the condition-number sandwich.
///
/// Knobs (all optional): epsilon (0.2), delta (0.5), dt_max (1e-3),
/// replicates (1), slope_t (0.2), bootstrap (500).
struct ExperimentConfig {
  std::string name;
  std::vector<int> n_list;
  std::string m_offset = "zero";  // "zero" or "log": M = N + ceil(ln N)
  EntryLaw ensemble;
  std::vector<double> grid;
  std::vector<double> r_grid;
  int trials = 100;
  std::uint64_t master_seed = 1;
  std::map<std::string, double> knobs;
  std::map<std::string, double> calibration;
  std::string output_path;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws std::invalid_argument unless trials >= 100, n_list is non-empty
/// and strictly ascending, and m_offset is known.
void validate(const ExperimentConfig& cfg);

double knob(const ExperimentConfig& cfg, const std::string& key, double fallback);
int rows_for(const ExperimentConfig& cfg, int n);

/// Per-trial output row.
struct TrialRecord {
  std::string experiment;
  int n = 0;
  int m = 0;
  std::string ensemble;
  double param = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;  // stream id of the trial's RNG stream
  double sigma1 = 0.0;
  double sigma_n = 0.0;
  double kappa = 0.0;
  double aux1 = 0.0;
  double aux2 = 0.0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

struct GroupSummary {
  std::string statistic;
  int n = 0;
  int m = 0;
  double param = 0.0;
  QuantileSummary quantiles;
};

struct KsSummary {
  std::string name;
  int n = 0;
  int m = 0;
  int replicate = 0;
  double statistic = 0.0;
  double critical = 0.0;  // 95% Kolmogorov value for the sample size
  int samples = 0;
};

struct SlopeSummary {
  std::string name;
  double slope = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double boot_lo = 0.0;
  double boot_hi = 0.0;
  int points = 0;
};

/// One checked inequality. Upper: observed <= bound. Lower: observed >= bound.
/// margin > 0 means slack, so tightening a knob lowers it.
struct Margin {
  enum class Kind { Upper, Lower };
  std::string name;
  int n = 0;
  double param = 0.0;
  double observed = 0.0;
  double bound = 0.0;
  Kind kind = Kind::Upper;

  double margin() const { return kind == Kind::Upper ? bound - observed : observed - bound; }
  bool ok() const { return margin() >= 0.0; }
};

struct PlotPoint {
  double x = 0.0;
  double y = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct PlotSeries {
  std::string name;
  std::vector<PlotPoint> points;
};

struct SummaryStats {
  std::string experiment;
  std::vector<GroupSummary> groups;
  std::vector<KsSummary> ks;
  std::vector<SlopeSummary> slopes;
  std::vector<Margin> margins;
  std::map<std::string, double> calibration;
  std::vector<PlotSeries> plots;
  std::vector<TrialRecord> records;

  /// All margins whose name starts with `prefix` hold.
  bool ok(const std::string& prefix = "") const;
  const SlopeSummary* slope(const std::string& name) const;
  const GroupSummary* group(const std::string& statistic, int n, double param) const;
};

/// D = |sigma_1(H + lambda G) - sqrt(1 + lambda^2) sigma_1(G)| on one shared
/// G per trial. Normalized statistic N^2 log(1 + lambda^2) D / sqrt(1 + lambda^2).
/// Calibration key "smoothed_median" adds median bounds; with several N a
/// non-increasing trend is checked per lambda.
SummaryStats run_smoothed_singular(const ExperimentConfig& cfg, int threads = 1);

/// Coupled DBMs from sigma(H) and sigma(G) under shared noise, observed at
/// the t grid. Fits log median |gap| against log t (per N) and against log N
/// (at knob slope_t). Real ensembles only.
SummaryStats run_coupled_relaxation(const ExperimentConfig& cfg, int threads = 1);

/// Two-sided survival sandwich between N sigma_1(H) and N sigma_1(G) with
/// shift N^-delta and allowance N^eps max(N^{-1+delta}, N^{-1/2}) plus three
/// DKW half-widths of each sample.
SummaryStats run_universality_smallest(const ExperimentConfig& cfg, int threads = 1);

/// Reference law for N sigma_1 of complex matrices.
double complex_exact_cdf(double r);
/// Law of N sigma_1 when (N sigma_1)^2 is standard exponential.
double complex_squared_exp_cdf(double r);

/// KS distance of N sigma_1 to complex_exact_cdf for every N and replicate
/// (knob replicates). Also reports the distance to complex_squared_exp_cdf
/// under the name "ks_squared". Throws std::invalid_argument for real laws.
SummaryStats run_complex_exact(const ExperimentConfig& cfg, int threads = 1);

/// (i) |kappa(H + lambda G) - kappa(G)| log(1 + lambda^2) over the lambda
/// grid, bounded by calibration key "condition_median" when present;
/// (ii) survival sandwich for kappa/N over r_grid with shift N^{-2/3+eps}
/// and allowance N^{-1/3-eps} plus sampling error.
SummaryStats run_condition(const ExperimentConfig& cfg, int threads = 1);

/// The complex-exact and condition pipelines on M x N matrices,
/// M = N + ceil(ln N), alongside the square runs from identical seeds.
/// The rectangular KS must stay within 1.5x of max(square KS, critical).
SummaryStats run_nonsquare(const ExperimentConfig& cfg, int threads = 1);

/// log10(M N^{3/2}) + 2 log10(kappa); the O(1) term is dropped.
double lop_estimate(int m, int n, double kappa);

/// kappa * delta / 2, as stated for conjugate gradient.
double cg_iterations(double kappa, double delta);

/// Calibration constant: 1.25 x the largest median over the lambda grid
/// of the smoothed (or condition) statistic with Gaussian H.
double calibrate_smoothed(const ExperimentConfig& gaussian_cfg, int threads = 1);
double calibrate_condition(const ExperimentConfig& gaussian_cfg, int threads = 1);

}  // namespace hardedge
