#include "hardedge/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "hardedge/dynamics.hpp"
#include "hardedge/linalg.hpp"
#include "hardedge/parallel.hpp"
#include "hardedge/spectra.hpp"

namespace hardedge {

namespace {

// Bootstrap streams live far from trial indices.
constexpr std::uint64_t kBootstrapStream = 0xB0075712A9ull;

RngStreamSpec trial_stream(const ExperimentConfig& cfg, int trial, int n, int replicate) {
  return RngStreamSpec{cfg.master_seed, static_cast<std::uint64_t>(trial)}
      .child(static_cast<std::uint64_t>(n))
      .child(static_cast<std::uint64_t>(replicate));
}

EntryLaw gaussian_like(const EntryLaw& law) {
  return law.is_complex() ? gaussian_complex() : gaussian_real();
}

std::string tag(const std::string& base, int n) { return base + "/N=" + std::to_string(n); }

std::string tag(const std::string& base, int n, const char* key, double v) {
  std::ostringstream os;
  os << base << "/N=" << n << '/' << key << '=' << v;
  return os.str();
}

std::string tag(const std::string& base, const char* key, double v) {
  std::ostringstream os;
  os << base << '/' << key << '=' << v;
  return os.str();
}

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// alpha A + beta B for same-shaped samples.
MatrixSample combine(const MatrixSample& a, double alpha, const MatrixSample& b, double beta) {
  if (a.is_complex()) {
    return make_sample(Eigen::MatrixXcd(alpha * a.complex() + beta * b.complex()), a.seed_path);
  }
  return make_sample(Eigen::MatrixXd(alpha * a.real() + beta * b.real()), a.seed_path);
}

TrialRecord base_record(const std::string& experiment, const ExperimentConfig& cfg, int n, int m,
                        int trial, const RngStreamSpec& stream, const ExtremeSingularValues& ev) {
  TrialRecord r;
  r.experiment = experiment;
  r.n = n;
  r.m = m;
  r.ensemble = cfg.ensemble.label();
  r.trial = trial;
  r.seed = stream.stream_id;
  r.sigma1 = ev.smallest;
  r.sigma_n = ev.largest;
  r.kappa = ev.largest / ev.smallest;
  return r;
}

void add_group(SummaryStats& out, const std::string& statistic, int n, int m, double param,
               const std::vector<double>& values) {
  out.groups.push_back({statistic, n, m, param, summarize(values)});
}

PlotPoint median_point(double x, const QuantileSummary& q) { return {x, q.q50, q.median_lo, q.median_hi}; }

SlopeSummary fit_slope(const std::string& name, const std::vector<double>& x,
                       const std::vector<std::vector<double>>& groups, const ExperimentConfig& cfg,
                       std::uint64_t salt) {
  const auto est = log_median_slope(
      x, groups, RngStreamSpec{cfg.master_seed, kBootstrapStream}.child(salt),
      static_cast<int>(knob(cfg, "bootstrap", 500)));
  return {name, est.fit.slope, est.fit.ci_lo, est.fit.ci_hi, est.boot_lo, est.boot_hi, est.fit.points};
}

void add_range(SummaryStats& out, const std::string& name, int n, double param, double observed,
               double lo, double hi) {
  out.margins.push_back({name + "/lower", n, param, observed, lo, Margin::Kind::Lower});
  out.margins.push_back({name + "/upper", n, param, observed, hi, Margin::Kind::Upper});
}

// Survival sandwich between samples x (tested) and y (reference):
//   S_y(r + shift) - bound <= S_x(r) <= S_y(r - shift) + bound.
// Returns the largest raw violation over the grid.
double survival_sandwich(SummaryStats& out, const std::string& prefix, int n,
                         const std::vector<double>& x_sorted, const std::vector<double>& y_sorted,
                         const std::vector<double>& r_grid, double shift, double allowance) {
  const double sampling = 3.0 * (dkw_bound(static_cast<int>(x_sorted.size())) +
                                 dkw_bound(static_cast<int>(y_sorted.size())));
  const double bound = allowance + sampling;
  double worst = -1.0;
  for (double r : r_grid) {
    const double sx = empirical_survival(x_sorted, r);
    const double below = empirical_survival(y_sorted, r + shift) - sx;
    const double above = sx - empirical_survival(y_sorted, r - shift);
    out.margins.push_back({prefix + "_lower/N=" + std::to_string(n), n, r, below, bound,
                           Margin::Kind::Upper});
    out.margins.push_back({prefix + "_upper/N=" + std::to_string(n), n, r, above, bound,
                           Margin::Kind::Upper});
    worst = std::max({worst, below, above});
  }
  return worst;
}

void add_trend(SummaryStats& out, const std::string& name, const std::vector<int>& ns,
               const std::vector<double>& values, double param) {
  for (std::size_t i = 1; i < ns.size(); ++i) {
    out.margins.push_back({tag(name, ns[i]), ns[i], param, values[i], values[i - 1],
                           Margin::Kind::Upper});
  }
}

PlotSeries survival_series(const std::string& name, const std::vector<double>& x_sorted,
                           const std::vector<double>& r_grid) {
  PlotSeries s{name, {}};
  const double w = dkw_bound(static_cast<int>(x_sorted.size()));
  for (double r : r_grid) {
    const double y = empirical_survival(x_sorted, r);
    s.points.push_back({r, y, std::max(0.0, y - w), std::min(1.0, y + w)});
  }
  return s;
}

}  // namespace

// ------------------------------------------------------------------ config

void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 100) throw std::invalid_argument("trials must be at least 100");
  if (cfg.n_list.empty()) throw std::invalid_argument("N_list must not be empty");
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    if (cfg.n_list[i] < 2) throw std::invalid_argument("N_list entries must be at least 2");
    if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1]) {
      throw std::invalid_argument("N_list must be sorted ascending without repeats");
    }
  }
  if (cfg.m_offset != "zero" && cfg.m_offset != "log") {
    throw std::invalid_argument("M_offset must be \"zero\" or \"log\"");
  }
  validate(cfg.ensemble);
}

double knob(const ExperimentConfig& cfg, const std::string& key, double fallback) {
  const auto it = cfg.knobs.find(key);
  return it == cfg.knobs.end() ? fallback : it->second;
}

int rows_for(const ExperimentConfig& cfg, int n) {
  if (cfg.m_offset == "log") return n + static_cast<int>(std::ceil(std::log(static_cast<double>(n))));
  return n;
}

bool SummaryStats::ok(const std::string& prefix) const {
  return std::all_of(margins.begin(), margins.end(), [&](const Margin& m) {
    return m.name.rfind(prefix, 0) != 0 || m.ok();
  });
}

const SlopeSummary* SummaryStats::slope(const std::string& name) const {
  for (const auto& s : slopes) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const GroupSummary* SummaryStats::group(const std::string& statistic, int n, double param) const {
  for (const auto& g : groups) {
    if (g.statistic == statistic && g.n == n && std::abs(g.param - param) <= 1e-12 * std::max(1.0, std::abs(param))) {
      return &g;
    }
  }
  return nullptr;
}

// ------------------------------------------------------------ smoothed

SummaryStats run_smoothed_singular(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  if (cfg.grid.empty()) throw std::invalid_argument("smoothed run needs a lambda grid");
  for (double lambda : cfg.grid) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda values must be positive");
  }
  for (int n : cfg.n_list) {
    for (double lambda : cfg.grid) {
      if (lambda <= std::pow(static_cast<double>(n), -0.5)) {
        throw std::invalid_argument("lambda grid must lie above N^-1/2 for N = " + std::to_string(n));
      }
    }
  }
  SummaryStats out;
  out.experiment = "smoothed";
  out.calibration = cfg.calibration;
  const auto& lambdas = cfg.grid;
  const std::size_t nl = lambdas.size();
  const auto gauss = gaussian_like(cfg.ensemble);

  // medians[lambda][n]
  std::vector<std::vector<double>> median_norm(nl);
  std::vector<std::vector<std::vector<double>>> d_by_lambda(nl);

  for (int n : cfg.n_list) {
    const int m = rows_for(cfg, n);
    std::vector<TrialRecord> recs(static_cast<std::size_t>(cfg.trials) * nl);
    parallel_for(cfg.trials, threads, [&](int i) {
      const auto stream = trial_stream(cfg, i, n, 0);
      Engine engine = make_engine(stream);
      const auto h = sample_matrix(cfg.ensemble, m, n, engine);
      const auto g = sample_matrix(gauss, m, n, engine);
      const double sg = smallest_singular_value(g);
      for (std::size_t j = 0; j < nl; ++j) {
        const double lambda = lambdas[j];
        const double scale = std::sqrt(1.0 + lambda * lambda);
        const auto ev = extreme_singular_values(combine(h, 1.0, g, lambda));
        auto rec = base_record("smoothed", cfg, n, m, i, stream, ev);
        rec.param = lambda;
        rec.aux1 = std::abs(ev.smallest - scale * sg);
        rec.aux2 = static_cast<double>(n) * n * std::log1p(lambda * lambda) * rec.aux1 / scale;
        recs[static_cast<std::size_t>(i) * nl + j] = rec;
      }
    });
    std::vector<std::vector<double>> d(nl), norm(nl);
    for (const auto& r : recs) {
      const auto j = static_cast<std::size_t>(std::find(lambdas.begin(), lambdas.end(), r.param) - lambdas.begin());
      d[j].push_back(r.aux1);
      norm[j].push_back(r.aux2);
    }
    PlotSeries series{tag("median_normalized", n), {}};
    for (std::size_t j = 0; j < nl; ++j) {
      add_group(out, "normalized", n, m, lambdas[j], norm[j]);
      const auto& q = out.groups.back().quantiles;
      series.points.push_back(median_point(lambdas[j], q));
      median_norm[j].push_back(q.q50);
      d_by_lambda[j].push_back(d[j]);
      const auto cal = cfg.calibration.find("smoothed_median");
      if (cal != cfg.calibration.end()) {
        out.margins.push_back({tag("median", n, "lambda", lambdas[j]), n, lambdas[j], q.q50,
                               cal->second, Margin::Kind::Upper});
      }
    }
    out.plots.push_back(std::move(series));
    if (nl >= 2) {
      out.slopes.push_back(fit_slope(tag("lambda_slope", n), lambdas, d, cfg, static_cast<std::uint64_t>(n)));
    }
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }

  if (cfg.n_list.size() >= 2) {
    std::vector<double> ns(cfg.n_list.begin(), cfg.n_list.end());
    for (std::size_t j = 0; j < nl; ++j) {
      add_trend(out, tag("trend", "lambda", lambdas[j]), cfg.n_list, median_norm[j], lambdas[j]);
      out.slopes.push_back(fit_slope(tag("n_slope", "lambda", lambdas[j]), ns, d_by_lambda[j], cfg,
                                     1000 + j));
    }
  }
  return out;
}

// -------------------------------------------------------- coupled relaxation

SummaryStats run_coupled_relaxation(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  if (cfg.ensemble.is_complex()) {
    throw std::invalid_argument("coupled relaxation is implemented for real ensembles");
  }
  if (cfg.grid.empty()) throw std::invalid_argument("coupled relaxation needs a t grid");
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    if (!(cfg.grid[i] > 0.0) || (i > 0 && cfg.grid[i] <= cfg.grid[i - 1])) {
      throw std::invalid_argument("t grid must be positive and strictly ascending");
    }
  }
  SummaryStats out;
  out.experiment = "coupled";
  out.calibration = cfg.calibration;
  const auto& ts = cfg.grid;
  const std::size_t nt = ts.size();
  DbmOptions opts;
  opts.dt_max = knob(cfg, "dt_max", 1e-3);
  const double slope_t = knob(cfg, "slope_t", 0.2);
  std::vector<std::vector<double>> gaps_at_slope_t;

  for (int n : cfg.n_list) {
    std::vector<TrialRecord> recs(static_cast<std::size_t>(cfg.trials) * nt);
    parallel_for(cfg.trials, threads, [&](int i) {
      const auto stream = trial_stream(cfg, i, n, 0);
      const auto h = sample_matrix(cfg.ensemble, n, n, stream.child(0));
      const auto g = sample_matrix(gaussian_real(), n, n, stream.child(1));
      const auto snaps = coupled_dbm(h, g, ts, opts, stream.child(2));
      for (std::size_t j = 0; j < nt; ++j) {
        const auto& st = snaps[j].h;
        const ExtremeSingularValues ev{st.sigma1(), st.s.back()};
        auto rec = base_record("coupled", cfg, n, n, i, stream, ev);
        rec.param = ts[j];
        rec.aux1 = std::abs(snaps[j].sigma1_gap());
        rec.aux2 = static_cast<double>(n) * n * ts[j] * rec.aux1;
        recs[static_cast<std::size_t>(i) * nt + j] = rec;
      }
    });
    std::vector<std::vector<double>> gaps(nt), scaled(nt);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      gaps[k % nt].push_back(recs[k].aux1);
      scaled[k % nt].push_back(recs[k].aux2);
    }
    PlotSeries series{tag("median_gap", n), {}};
    for (std::size_t j = 0; j < nt; ++j) {
      add_group(out, "gap", n, n, ts[j], gaps[j]);
      series.points.push_back(median_point(ts[j], out.groups.back().quantiles));
      add_group(out, "scaled_gap", n, n, ts[j], scaled[j]);
      if (std::abs(ts[j] - slope_t) <= 1e-12) gaps_at_slope_t.push_back(gaps[j]);
    }
    out.plots.push_back(std::move(series));
    if (nt >= 2) {
      out.slopes.push_back(fit_slope(tag("t_slope", n), ts, gaps, cfg, static_cast<std::uint64_t>(n)));
      const auto& s = out.slopes.back();
      add_range(out, tag("t_slope", n), n, 0.0, s.slope, knob(cfg, "t_slope_min", -1.4),
                knob(cfg, "t_slope_max", -0.6));
    }
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }

  if (cfg.n_list.size() >= 2 && gaps_at_slope_t.size() == cfg.n_list.size()) {
    std::vector<double> ns(cfg.n_list.begin(), cfg.n_list.end());
    out.slopes.push_back(fit_slope("n_slope", ns, gaps_at_slope_t, cfg, 1000));
    add_range(out, "n_slope", 0, slope_t, out.slopes.back().slope, knob(cfg, "n_slope_min", -2.5),
              knob(cfg, "n_slope_max", -1.5));
  }
  return out;
}

// ------------------------------------------------------------ universality

SummaryStats run_universality_smallest(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  if (cfg.grid.empty()) throw std::invalid_argument("universality run needs an r grid");
  const double eps = knob(cfg, "epsilon", 0.2);
  const double delta = knob(cfg, "delta", 0.5);
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  SummaryStats out;
  out.experiment = "universality";
  out.calibration = cfg.calibration;
  const auto gauss = gaussian_like(cfg.ensemble);
  std::vector<double> worst;

  for (int n : cfg.n_list) {
    const int m = rows_for(cfg, n);
    std::vector<TrialRecord> recs(static_cast<std::size_t>(cfg.trials));
    parallel_for(cfg.trials, threads, [&](int i) {
      const auto stream = trial_stream(cfg, i, n, 0);
      const auto h = sample_matrix(cfg.ensemble, m, n, stream.child(0));
      const auto g = sample_matrix(gauss, m, n, stream.child(1));
      const auto ev = extreme_singular_values(h);
      auto rec = base_record("universality", cfg, n, m, i, stream, ev);
      rec.param = delta;
      rec.aux1 = n * ev.smallest;
      rec.aux2 = n * smallest_singular_value(g);
      recs[static_cast<std::size_t>(i)] = rec;
    });
    std::vector<double> xh, xg;
    for (const auto& r : recs) {
      xh.push_back(r.aux1);
      xg.push_back(r.aux2);
    }
    xh = sorted(std::move(xh));
    xg = sorted(std::move(xg));
    const double nd = n;
    const double shift = std::pow(nd, -delta);
    const double allowance = std::pow(nd, eps) * std::max(std::pow(nd, -1.0 + delta), std::pow(nd, -0.5));
    worst.push_back(survival_sandwich(out, "sandwich", n, xh, xg, cfg.grid, shift, allowance));
    out.ks.push_back({"H_vs_G", n, m, 0, ks_statistic(xh, xg), ks_critical_value(cfg.trials, cfg.trials),
                      cfg.trials});
    add_group(out, "n_sigma1_H", n, m, 0.0, xh);
    add_group(out, "n_sigma1_G", n, m, 0.0, xg);
    out.plots.push_back(survival_series(tag("survival_H", n), xh, cfg.grid));
    out.plots.push_back(survival_series(tag("survival_G", n), xg, cfg.grid));
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  add_trend(out, "trend_max_violation", cfg.n_list, worst, 0.0);
  return out;
}

// ------------------------------------------------------------ complex exact

double complex_exact_cdf(double r) { return r <= 0.0 ? 0.0 : -std::expm1(-r); }

double complex_squared_exp_cdf(double r) { return r <= 0.0 ? 0.0 : -std::expm1(-r * r); }

SummaryStats run_complex_exact(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  if (!cfg.ensemble.is_complex()) {
    throw std::invalid_argument("complex-exact run needs a complex ensemble, got " + cfg.ensemble.label());
  }
  const int replicates = static_cast<int>(knob(cfg, "replicates", 1));
  if (replicates < 1) throw std::invalid_argument("replicates must be positive");
  SummaryStats out;
  out.experiment = "complex_exact";
  out.calibration = cfg.calibration;
  const double crit = ks_critical_value(cfg.trials);
  // ks[rep][n index]
  std::vector<std::vector<double>> ks(static_cast<std::size_t>(replicates));

  for (int rep = 0; rep < replicates; ++rep) {
    for (int n : cfg.n_list) {
      const int m = rows_for(cfg, n);
      std::vector<TrialRecord> recs(static_cast<std::size_t>(cfg.trials));
      parallel_for(cfg.trials, threads, [&](int i) {
        const auto stream = trial_stream(cfg, i, n, rep);
        const auto h = sample_matrix(cfg.ensemble, m, n, stream);
        const auto ev = extreme_singular_values(h);
        auto rec = base_record("complex_exact", cfg, n, m, i, stream, ev);
        rec.param = rep;
        rec.aux1 = n * ev.smallest;
        recs[static_cast<std::size_t>(i)] = rec;
      });
      std::vector<double> x;
      for (const auto& r : recs) x.push_back(r.aux1);
      x = sorted(std::move(x));
      const double d = ks_statistic(x, complex_exact_cdf);
      ks[static_cast<std::size_t>(rep)].push_back(d);
      out.ks.push_back({"ks", n, m, rep, d, crit, cfg.trials});
      out.ks.push_back({"ks_squared", n, m, rep, ks_statistic(x, complex_squared_exp_cdf), crit, cfg.trials});
      if (rep == 0) {
        out.margins.push_back({tag("ks", n), n, 0.0, d, crit, Margin::Kind::Upper});
        const double p = complex_exact_cdf(1.0);
        const double p_hat = 1.0 - empirical_survival(x, 1.0);
        out.margins.push_back({tag("cdf_at_1", n), n, 1.0, std::abs(p_hat - p),
                               3.0 * std::sqrt(p * (1.0 - p) / cfg.trials), Margin::Kind::Upper});
        add_group(out, "n_sigma1", n, m, 0.0, x);
        PlotSeries series{tag("cdf", n), {}};
        const double w = dkw_bound(cfg.trials);
        for (int k = 1; k <= 40; ++k) {
          const double r = 0.1 * k;
          const double y = 1.0 - empirical_survival(x, r);
          series.points.push_back({r, y, std::max(0.0, y - w), std::min(1.0, y + w)});
        }
        out.plots.push_back(std::move(series));
      }
      out.records.insert(out.records.end(), recs.begin(), recs.end());
    }
  }

  if (cfg.n_list.size() >= 2) {
    const int n_big = cfg.n_list.back();
    int wins = 0;
    for (int rep = 0; rep < replicates; ++rep) {
      const auto& row = ks[static_cast<std::size_t>(rep)];
      if (row.back() <= row.front()) ++wins;
      out.margins.push_back({tag("ks_rate", n_big, "rep", rep), n_big, static_cast<double>(rep), row.back(),
                             crit + 2.0 / std::sqrt(static_cast<double>(n_big)), Margin::Kind::Upper});
    }
    out.margins.push_back({"ks_trend_fraction", n_big, 0.0, static_cast<double>(wins) / replicates,
                           knob(cfg, "trend_fraction", 0.8), Margin::Kind::Lower});
  }
  return out;
}

// --------------------------------------------------------------- condition

SummaryStats run_condition(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  if (cfg.grid.empty() && cfg.r_grid.empty()) {
    throw std::invalid_argument("condition run needs a lambda grid, an r grid, or both");
  }
  const double eps = knob(cfg, "epsilon", 0.2);
  SummaryStats out;
  out.experiment = "condition";
  out.calibration = cfg.calibration;
  const auto gauss = gaussian_like(cfg.ensemble);
  const auto& lambdas = cfg.grid;
  const std::size_t nl = lambdas.size();

  for (int n : cfg.n_list) {
    const int m = rows_for(cfg, n);
    const std::size_t per = nl + 1;
    std::vector<TrialRecord> recs(static_cast<std::size_t>(cfg.trials) * per);
    parallel_for(cfg.trials, threads, [&](int i) {
      const auto stream = trial_stream(cfg, i, n, 0);
      const auto h = sample_matrix(cfg.ensemble, m, n, stream.child(0));
      const auto g = sample_matrix(gauss, m, n, stream.child(1));
      const auto eh = extreme_singular_values(h);
      const auto eg = extreme_singular_values(g);
      const double kg = eg.largest / eg.smallest;
      auto rec = base_record("condition_sandwich", cfg, n, m, i, stream, eh);
      rec.aux1 = rec.kappa / n;
      rec.aux2 = kg / n;
      const std::size_t base = static_cast<std::size_t>(i) * per;
      recs[base] = rec;
      for (std::size_t j = 0; j < nl; ++j) {
        const double lambda = lambdas[j];
        const auto ev = extreme_singular_values(combine(h, 1.0, g, lambda));
        auto r = base_record("condition_smoothed", cfg, n, m, i, stream, ev);
        r.param = lambda;
        r.aux1 = std::abs(r.kappa - kg) * std::log1p(lambda * lambda);
        r.aux2 = kg;
        recs[base + 1 + j] = r;
      }
    });

    std::vector<double> kh, kgs;
    std::vector<std::vector<double>> stat(nl);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const std::size_t slot = k % per;
      if (slot == 0) {
        kh.push_back(recs[k].aux1);
        kgs.push_back(recs[k].aux2);
      } else {
        stat[slot - 1].push_back(recs[k].aux1);
      }
    }
    PlotSeries series{tag("median_kappa_shift", n), {}};
    for (std::size_t j = 0; j < nl; ++j) {
      add_group(out, "kappa_shift", n, m, lambdas[j], stat[j]);
      const auto& q = out.groups.back().quantiles;
      series.points.push_back(median_point(lambdas[j], q));
      const auto cal = cfg.calibration.find("condition_median");
      if (cal != cfg.calibration.end()) {
        out.margins.push_back({tag("median", n, "lambda", lambdas[j]), n, lambdas[j], q.q50,
                               cal->second, Margin::Kind::Upper});
      }
    }
    if (nl > 0) out.plots.push_back(std::move(series));

    kh = sorted(std::move(kh));
    kgs = sorted(std::move(kgs));
    add_group(out, "kappa_over_n_H", n, m, 0.0, kh);
    add_group(out, "kappa_over_n_G", n, m, 0.0, kgs);
    out.ks.push_back({"kappa_H_vs_G", n, m, 0, ks_statistic(kh, kgs),
                      ks_critical_value(cfg.trials, cfg.trials), cfg.trials});
    if (!cfg.r_grid.empty()) {
      const double nd = n;
      survival_sandwich(out, "sandwich", n, kh, kgs, cfg.r_grid, std::pow(nd, -2.0 / 3.0 + eps),
                        std::pow(nd, -1.0 / 3.0 - eps));
      out.plots.push_back(survival_series(tag("survival_kappa_H", n), kh, cfg.r_grid));
      out.plots.push_back(survival_series(tag("survival_kappa_G", n), kgs, cfg.r_grid));
    }
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  return out;
}

// --------------------------------------------------------------- nonsquare

SummaryStats run_nonsquare(const ExperimentConfig& cfg, int threads) {
  validate(cfg);
  ExperimentConfig square = cfg;
  square.m_offset = "zero";
  ExperimentConfig rect = cfg;
  rect.m_offset = "log";
  SummaryStats out;
  out.experiment = "nonsquare";
  out.calibration = cfg.calibration;

  auto merge = [&out](SummaryStats part, const std::string& prefix) {
    for (auto& g : part.groups) {
      g.statistic = prefix + g.statistic;
      out.groups.push_back(std::move(g));
    }
    for (auto& k : part.ks) {
      k.name = prefix + k.name;
      out.ks.push_back(std::move(k));
    }
    for (auto& s : part.slopes) {
      s.name = prefix + s.name;
      out.slopes.push_back(std::move(s));
    }
    for (auto& m : part.margins) {
      m.name = prefix + m.name;
      out.margins.push_back(std::move(m));
    }
    for (auto& p : part.plots) {
      p.name = prefix + p.name;
      out.plots.push_back(std::move(p));
    }
    for (auto& r : part.records) {
      r.experiment = "nonsquare/" + prefix + r.experiment;
      out.records.push_back(std::move(r));
    }
  };

  if (cfg.ensemble.is_complex()) {
    auto sq = run_complex_exact(square, threads);
    auto rc = run_complex_exact(rect, threads);
    for (const auto& k_rect : rc.ks) {
      if (k_rect.name != "ks" || k_rect.replicate != 0) continue;
      for (const auto& k_sq : sq.ks) {
        if (k_sq.name == "ks" && k_sq.replicate == 0 && k_sq.n == k_rect.n) {
          out.margins.push_back({tag("ks_vs_square", k_rect.n), k_rect.n, 0.0, k_rect.statistic,
                                 1.5 * std::max(k_sq.statistic, k_sq.critical), Margin::Kind::Upper});
        }
      }
    }
    merge(std::move(sq), "square/");
    merge(std::move(rc), "rect/");
  }
  if (!cfg.grid.empty() || !cfg.r_grid.empty()) {
    merge(run_condition(square, threads), "square/");
    merge(run_condition(rect, threads), "rect/");
  }
  return out;
}

// ------------------------------------------------------------ applications

double lop_estimate(int m, int n, double kappa) {
  if (m < 1 || n < 1) throw std::invalid_argument("lop_estimate needs M, N >= 1");
  if (!(kappa >= 1.0)) throw std::invalid_argument("lop_estimate needs kappa >= 1");
  return std::log10(static_cast<double>(m)) + 1.5 * std::log10(static_cast<double>(n)) +
         2.0 * std::log10(kappa);
}

double cg_iterations(double kappa, double delta) {
  if (!(kappa >= 1.0)) throw std::invalid_argument("cg_iterations needs kappa >= 1");
  if (!(delta >= 0.0)) throw std::invalid_argument("cg_iterations needs delta >= 0");
  return 0.5 * kappa * delta;
}

// ------------------------------------------------------------ calibration

namespace {

double max_median(const SummaryStats& s, const std::string& statistic) {
  double best = 0.0;
  for (const auto& g : s.groups) {
    if (g.statistic == statistic) best = std::max(best, g.quantiles.q50);
  }
  return 1.25 * best;
}

}  // namespace

double calibrate_smoothed(const ExperimentConfig& gaussian_cfg, int threads) {
  ExperimentConfig cfg = gaussian_cfg;
  cfg.calibration.clear();
  return max_median(run_smoothed_singular(cfg, threads), "normalized");
}

double calibrate_condition(const ExperimentConfig& gaussian_cfg, int threads) {
  ExperimentConfig cfg = gaussian_cfg;
  cfg.calibration.clear();
  cfg.r_grid.clear();
  return max_median(run_condition(cfg, threads), "kappa_shift");
}

}  // namespace hardedge
