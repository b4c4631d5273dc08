#include "hardedge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "hardedge/comparison.hpp"
#include "hardedge/dynamics.hpp"
#include "hardedge/io.hpp"
#include "hardedge/linalg.hpp"
#include "hardedge/parallel.hpp"
#include "hardedge/spectra.hpp"

namespace hardedge {

namespace {

// Raised for bad flag values that CLI11 cannot catch on its own.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> trials;
  int threads = 1;
  std::string format = "csv";
  bool force = false;
  std::string calibration_path;
};

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  body(f);
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (c == '/' || c == '=' || c == ' ') c = '_';
  }
  return s;
}

RunManifest start_manifest(const ExperimentConfig& cfg) {
  RunManifest m;
  m.config = cfg;
  m.started_at = utc_now();
  return m;
}

void finish(RunManifest manifest, const std::filesystem::path& dir) {
  manifest.finished_at = utc_now();
  write_manifest(std::move(manifest), dir);
}

void write_experiment(const SummaryStats& stats, const ExperimentConfig& cfg, const Globals& g,
                      RunManifest manifest) {
  const std::filesystem::path dir = g.out_dir;
  prepare_output_dir(dir, g.force);
  if (g.format == "json") {
    json rows = json::array();
    for (const auto& r : stats.records) {
      rows.push_back({{"experiment", r.experiment}, {"N", r.n}, {"M", r.m}, {"ensemble", r.ensemble},
                      {"param", r.param}, {"trial", r.trial}, {"seed", r.seed}, {"sigma1", r.sigma1},
                      {"sigmaN", r.sigma_n}, {"kappa", r.kappa}, {"aux1", r.aux1}, {"aux2", r.aux2}});
    }
    write_file(dir / "records.json", [&](std::ostream& o) { o << rows.dump(1) << '\n'; });
  } else {
    write_file(dir / "records.csv", [&](std::ostream& o) { write_records_csv(o, stats.records); });
  }
  write_file(dir / "summary.json",
             [&](std::ostream& o) { o << summary_to_json(stats, cfg).dump(2) << '\n'; });
  if (!stats.plots.empty()) {
    std::filesystem::create_directories(dir / "plots");
    for (const auto& p : stats.plots) {
      write_file(dir / "plots" / (safe_name(p.name) + ".csv"), [&](std::ostream& o) { write_plot_csv(o, p); });
    }
  }
  finish(std::move(manifest), dir);
}

void print_summary(std::ostream& out, const SummaryStats& stats) {
  out << stats.experiment << ": " << stats.records.size() << " records\n";
  for (const auto& k : stats.ks) {
    out << "  ks " << k.name << " N=" << k.n << " M=" << k.m << " rep=" << k.replicate << ": "
        << k.statistic << " (critical " << k.critical << ")\n";
  }
  for (const auto& s : stats.slopes) {
    out << "  slope " << s.name << ": " << s.slope << " [" << s.ci_lo << ", " << s.ci_hi << "]\n";
  }
  int failed = 0;
  for (const auto& m : stats.margins) {
    if (!m.ok()) {
      ++failed;
      out << "  FAIL " << m.name << " param=" << m.param << ": observed " << m.observed
          << (m.kind == Margin::Kind::Upper ? " > " : " < ") << m.bound << '\n';
    }
  }
  out << "  margins: " << stats.margins.size() - failed << '/' << stats.margins.size() << " hold\n";
}

ExperimentConfig resolve_config(const std::string& experiment, const Globals& g,
                                const std::vector<int>& n_override, const std::string& ensemble_override,
                                const std::vector<double>& grid_override) {
  ExperimentConfig cfg = g.config_path.empty() ? default_config(experiment) : load_config(g.config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.trials) cfg.trials = *g.trials;
  if (!n_override.empty()) cfg.n_list = n_override;
  if (!ensemble_override.empty()) cfg.ensemble = law_from_label(ensemble_override);
  if (!grid_override.empty()) cfg.grid = grid_override;
  if (!g.calibration_path.empty()) {
    for (const auto& [k, v] : load_calibration(g.calibration_path)) cfg.calibration[k] = v;
  }
  cfg.output_path = g.out_dir;
  validate(cfg);
  return cfg;
}

// Verification suite of exact, cheap invariants. Prints one line per check.
int run_verify(std::ostream& out, int threads, bool quick) {
  const int scale = quick ? 1 : 10;
  int failures = 0;
  auto check = [&](const std::string& name, const std::function<bool()>& body) {
    bool ok = false;
    std::string note;
    try {
      ok = body();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << name << note << '\n';
    if (!ok) ++failures;
  };

  check("ks single point vs uniform is 0.5", [] {
    const std::vector<double> x{0.5};
    return std::abs(ks_statistic(x, [](double v) { return std::clamp(v, 0.0, 1.0); }) - 0.5) < 1e-15;
  });
  check("ks identical samples is 0", [] {
    const std::vector<double> x{0.1, 0.4, 0.9};
    return ks_statistic(x, x) == 0.0;
  });
  check("lop and cg calculators", [] {
    return lop_estimate(1, 1, 1.0) == 0.0 && std::abs(lop_estimate(100, 100, 100.0) - 9.0) < 1e-12 &&
           cg_iterations(2.0, 1.0) == 1.0 && cg_iterations(5.0, 0.0) == 0.0;
  });
  check("symmetrization spectrum equals +-singular values", [&] {
    bool ok = true;
    parallel_for(6 * scale, threads, [&](int i) {
      const auto a = sample_matrix(i % 2 ? rademacher() : gaussian_complex(), 12, 10, RngStreamSpec{11, static_cast<std::uint64_t>(i)});
      auto eig = hermitian_eigenvalues(girko_symmetrize(a));
      auto sv = dense_singular_values(a);
      std::vector<double> expect;
      for (double s : sv) {
        expect.push_back(s);
        expect.push_back(-s);
      }
      expect.resize(eig.size(), 0.0);
      std::sort(expect.begin(), expect.end());
      std::sort(eig.begin(), eig.end());
      for (std::size_t k = 0; k < eig.size(); ++k) {
        if (std::abs(eig[k] - expect[k]) > 1e-10) ok = false;
      }
    });
    return ok;
  });
  check("sandwich ordering on Gaussian matrices", [&] {
    for (int i = 0; i < 200 * scale; ++i) {
      const auto h = sample_matrix(gaussian_real(), 16, 16, RngStreamSpec{12, static_cast<std::uint64_t>(i)});
      sandwich_check(h, 1.0, std::pow(16.0, -1.25));
    }
    return true;
  });
  check("parabolic flow keeps |phi| <= psi and conserves sum phi", [] {
    const auto h = singular_values(sample_matrix(rademacher(), 16, 16, RngStreamSpec{13, 0}));
    const auto g = singular_values(sample_matrix(gaussian_real(), 16, 16, RngStreamSpec{13, 1}));
    const auto run = run_coupling(h, g, 0.5, 0.02, CouplingOptions{}, RngStreamSpec{13, 2});
    double sum0 = 0.0, sum1 = 0.0;
    for (double v : run.initial.phi) sum0 += v;
    for (std::size_t k = 0; k < run.final.phi.size(); ++k) {
      sum1 += run.final.phi[k];
      if (std::abs(run.final.phi[k]) > run.final.psi[k] + 1e-15) return false;
    }
    return std::abs(sum1 - sum0) < 1e-8;
  });
  check("identical initial data gives zero coupled gaps", [] {
    const auto h = sample_matrix(gaussian_real(), 12, 12, RngStreamSpec{14, 0});
    const std::vector<double> grid{0.01, 0.02};
    for (const auto& s : coupled_dbm(h, h, grid, DbmOptions{}, RngStreamSpec{14, 1})) {
      if (s.max_gap() != 0.0) return false;
    }
    return true;
  });
  check("config round trip", [] {
    const auto cfg = default_config("condition");
    return config_from_json(json::parse(config_to_json(cfg).dump())) == cfg;
  });
  check("zero row offset keeps square shape", [] { return rows_for(default_config("smoothed"), 64) == 64; });
  out << (failures == 0 ? "verify: all checks passed\n" : "verify: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

std::string matrix_csv(const MatrixSample& a) {
  std::ostringstream o;
  o << "row,col,re,im\n";
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) {
      const cplx v = a.is_complex() ? a.complex()(i, j) : cplx(a.real()(i, j), 0.0);
      o << i << ',' << j << ',' << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
    }
  }
  return o.str();
}

}  // namespace

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.name = experiment;
  cfg.master_seed = 1;
  cfg.ensemble = rademacher();
  if (experiment == "smoothed") {
    cfg.n_list = {64, 128, 256};
    cfg.grid = {0.5, 1.0, 2.0};
    cfg.trials = 1000;
  } else if (experiment == "coupled") {
    cfg.n_list = {64, 128, 256};
    cfg.grid = {0.05, 0.1, 0.2, 0.4};
    cfg.trials = 200;
    cfg.knobs = {{"dt_max", 1e-3}, {"slope_t", 0.2}};
  } else if (experiment == "universality") {
    cfg.n_list = {64, 256};
    cfg.grid = {0.25, 0.5, 1.0, 2.0};
    cfg.trials = 4000;
    cfg.knobs = {{"epsilon", 0.2}, {"delta", 0.5}};
  } else if (experiment == "complex-exact") {
    cfg.n_list = {128};
    cfg.ensemble = gaussian_complex();
    cfg.trials = 4000;
  } else if (experiment == "condition") {
    cfg.n_list = {256};
    cfg.grid = {1.0};
    cfg.r_grid = {1.0, 2.0, 4.0, 8.0};
    cfg.trials = 4000;
    cfg.knobs = {{"epsilon", 0.2}};
  } else if (experiment == "nonsquare") {
    cfg.n_list = {128};
    cfg.ensemble = gaussian_complex();
    cfg.r_grid = {1.0, 2.0, 4.0, 8.0};
    cfg.trials = 4000;
    cfg.knobs = {{"epsilon", 0.2}};
  } else {
    throw std::invalid_argument("no default configuration for '" + experiment + "'");
  }
  return cfg;
}

std::map<std::string, double> load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("(file)", "cannot open calibration file " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw SchemaError("(file)", "calibration must be a JSON object");
  std::map<std::string, double> out;
  for (const auto& [k, v] : j.items()) {
    if (v.is_number()) out[k] = v.get<double>();
  }
  return out;
}

void save_calibration(const std::map<std::string, double>& values, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json(values).dump(2) << '\n';
}

double calibrate_lindeberg_c(const LindebergDefaults& d, std::uint64_t seed, int threads) {
  const double rho = std::pow(static_cast<double>(d.n), -d.rho_exponent);
  const auto spec = make_f1(d.n, d.r, rho, d.a);
  const auto res = lindeberg_swap_experiment(gaussian_real(), rademacher(), d.n, spec, d.trials,
                                             RngStreamSpec{seed, 0}, d.eps, 0.0, threads);
  // budget(C) = N^{C eps} budget(0); the smallest admissible C.
  if (res.delta_hat <= res.budget || d.eps <= 0.0) return 0.0;
  return std::log(res.delta_hat / res.budget) / (d.eps * std::log(static_cast<double>(d.n)));
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hard-edge random matrix laboratory"};
  app.require_subcommand(1);
  // Global flags may also follow the subcommand.
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out_dir, "output directory (never overwritten without --force)");
  app.add_option("--trials", g.trials, "trial count override");
  app.add_option("--threads", g.threads, "worker threads, 0 = all cores");
  app.add_option("--format", g.format, "record format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--force", g.force, "replace an existing output directory");
  app.add_option("--calibration", g.calibration_path, "calibration constants JSON");

  std::function<int()> action;

  // sample
  int s_n = 8, s_m = 0;
  std::string s_ens = "gaussian-real";
  auto* sample = app.add_subcommand("sample", "emit one matrix and its symmetrized spectrum");
  sample->add_option("--N", s_n)->check(CLI::PositiveNumber);
  sample->add_option("--M", s_m, "rows (default N)");
  sample->add_option("--ensemble", s_ens);
  sample->callback([&] {
    action = [&] {
      if (g.out_dir.empty()) throw UsageError("sample needs --out");
      const int m = s_m == 0 ? s_n : s_m;
      const RngStreamSpec rng{g.seed.value_or(1), 0};
      const auto a = sample_matrix(law_from_label(s_ens), m, s_n, rng);
      ExperimentConfig cfg;
      cfg.name = "sample";
      cfg.n_list = {s_n};
      cfg.m_offset = "zero";
      cfg.ensemble = law_from_label(s_ens);
      cfg.master_seed = rng.master_seed;
      cfg.output_path = g.out_dir;
      auto manifest = start_manifest(cfg);
      prepare_output_dir(g.out_dir, g.force);
      write_file(std::filesystem::path(g.out_dir) / "matrix.csv", [&](std::ostream& o) { o << matrix_csv(a); });
      write_file(std::filesystem::path(g.out_dir) / "spectrum.csv",
                 [&](std::ostream& o) { write_spectrum_csv(o, SymmetrizedSpectrum(singular_values(a))); });
      finish(std::move(manifest), g.out_dir);
      out << "wrote " << m << "x" << s_n << " " << s_ens << " sample to " << g.out_dir << '\n';
      return 0;
    };
  });

  // dbm
  int d_n = 32;
  double d_t = 0.1, d_snap = 1e-3, d_dt = 1e-3;
  std::string d_ens = "gaussian-real";
  auto* dbm = app.add_subcommand("dbm", "singular-value DBM trajectory from one sample");
  dbm->add_option("--N", d_n)->check(CLI::PositiveNumber);
  dbm->add_option("--t", d_t, "final time")->check(CLI::PositiveNumber);
  dbm->add_option("--snapshot-dt", d_snap);
  dbm->add_option("--dt-max", d_dt)->check(CLI::PositiveNumber);
  dbm->add_option("--ensemble", d_ens);
  dbm->callback([&] {
    action = [&] {
      if (g.out_dir.empty()) throw UsageError("dbm needs --out");
      const auto law = law_from_label(d_ens);
      if (law.is_complex()) throw UsageError("dbm runs the real-entry dynamics; pick a real ensemble");
      const RngStreamSpec rng{g.seed.value_or(1), 0};
      const auto a = sample_matrix(law, d_n, d_n, rng.child(0));
      std::vector<DbmState> sys{DbmState::from_spectrum(SymmetrizedSpectrum(singular_values(a)))};
      Engine engine = make_engine(rng.child(1));
      DbmOptions opts;
      opts.dt_max = d_dt;
      DbmStats stats;
      const auto traj = dbm_trajectory(sys, d_t, d_snap, opts, engine, &stats);
      ExperimentConfig cfg;
      cfg.name = "dbm";
      cfg.n_list = {d_n};
      cfg.ensemble = law;
      cfg.grid = {d_t};
      cfg.master_seed = rng.master_seed;
      cfg.knobs = {{"dt_max", d_dt}, {"snapshot_dt", d_snap}};
      cfg.output_path = g.out_dir;
      auto manifest = start_manifest(cfg);
      prepare_output_dir(g.out_dir, g.force);
      write_file(std::filesystem::path(g.out_dir) / "trajectory.csv",
                 [&](std::ostream& o) { write_trajectory_csv(o, traj); });
      finish(std::move(manifest), g.out_dir);
      out << "dbm: " << stats.accepted << " steps, " << stats.newton_iterations << " Newton iterations, "
          << traj.size() << " snapshots\n";
      return 0;
    };
  });

  // experiment subcommands
  std::vector<int> e_n;
  std::string e_ens;
  std::vector<double> e_grid;
  using Runner = SummaryStats (*)(const ExperimentConfig&, int);
  const std::vector<std::pair<std::string, Runner>> experiments{
      {"coupled", run_coupled_relaxation},   {"smoothed", run_smoothed_singular},
      {"universality", run_universality_smallest}, {"complex-exact", run_complex_exact},
      {"condition", run_condition},          {"nonsquare", run_nonsquare}};
  for (const auto& [name, runner] : experiments) {
    auto* sub = app.add_subcommand(name, "Monte Carlo experiment: " + name);
    sub->add_option("--N", e_n, "N list override");
    sub->add_option("--ensemble", e_ens, "entry law override");
    sub->add_option("--grid", e_grid, "parameter grid override");
    sub->callback([&, name = name, runner = runner] {
      action = [&, name, runner] {
        if (g.out_dir.empty()) throw UsageError(name + " needs --out");
        const auto cfg = resolve_config(name, g, e_n, e_ens, e_grid);
        auto manifest = start_manifest(cfg);
        const auto stats = runner(cfg, resolve_threads(g.threads));
        write_experiment(stats, cfg, g, std::move(manifest));
        print_summary(out, stats);
        return stats.ok() ? 0 : 1;
      };
    });
  }

  // lindeberg
  LindebergDefaults ld;
  double l_c = 1.0;
  bool l_control = false;
  auto* lind = app.add_subcommand("lindeberg", "Gaussian vs Rademacher comparison of E F(Tr f)");
  lind->add_option("--N", ld.n)->check(CLI::PositiveNumber);
  lind->add_option("--r", ld.r)->check(CLI::PositiveNumber);
  lind->add_option("--a", ld.a);
  lind->add_option("--rho-exponent", ld.rho_exponent);
  lind->add_option("--eps", ld.eps);
  lind->add_option("--C", l_c, "budget constant (defaults to the calibration file value, else 1)");
  lind->add_flag("--control", l_control, "compare Gaussian against Gaussian instead");
  lind->callback([&] {
    action = [&] {
      if (g.out_dir.empty()) throw UsageError("lindeberg needs --out");
      if (g.trials) ld.trials = *g.trials;
      if (!g.calibration_path.empty() && lind->count("--C") == 0) {
        const auto cal = load_calibration(g.calibration_path);
        if (const auto it = cal.find("lindeberg_C"); it != cal.end()) l_c = it->second;
      }
      const double rho = std::pow(static_cast<double>(ld.n), -ld.rho_exponent);
      const auto spec = make_f1(ld.n, ld.r, rho, ld.a);
      const EntryLaw law_y = l_control ? gaussian_real() : rademacher();
      const RngStreamSpec rng{g.seed.value_or(1), 0};
      const auto res = lindeberg_swap_experiment(gaussian_real(), law_y, ld.n, spec, ld.trials, rng,
                                                 ld.eps, l_c, resolve_threads(g.threads));
      ExperimentConfig cfg;
      cfg.name = "lindeberg";
      cfg.n_list = {ld.n};
      cfg.ensemble = law_y;
      cfg.trials = std::max(ld.trials, 100);
      cfg.master_seed = rng.master_seed;
      cfg.knobs = {{"r", ld.r}, {"a", ld.a}, {"rho", rho}, {"epsilon", ld.eps}, {"C", l_c}};
      cfg.output_path = g.out_dir;
      auto manifest = start_manifest(cfg);
      prepare_output_dir(g.out_dir, g.force);
      const std::filesystem::path dir = g.out_dir;
      write_file(dir / "lindeberg.csv",
                 [&](std::ostream& o) { write_lindeberg_csv(o, res, "gaussian-real", law_y.label()); });
      write_file(dir / "summary.json", [&](std::ostream& o) { o << lindeberg_to_json(res).dump(2) << '\n'; });
      finish(std::move(manifest), dir);
      const bool ok = l_control ? res.delta_hat <= 2.0 * res.std_error : res.delta_hat <= res.budget;
      out << "lindeberg: delta_hat " << res.delta_hat << " stderr " << res.std_error << " budget "
          << res.budget << (ok ? " ok\n" : " VIOLATED\n");
      return ok ? 0 : 1;
    };
  });

  // apps
  auto* apps = app.add_subcommand("apps", "loss-of-precision and CG iteration calculators");
  apps->require_subcommand(1);
  int a_m = 1, a_n = 1;
  double a_kappa = 1.0, a_delta = 1.0;
  auto* lop = apps->add_subcommand("lop", "log10(M N^1.5) + 2 log10(kappa)");
  lop->add_option("--M", a_m)->required()->check(CLI::PositiveNumber);
  lop->add_option("--N", a_n)->required()->check(CLI::PositiveNumber);
  lop->add_option("--kappa", a_kappa)->required();
  lop->callback([&] {
    action = [&] {
      out << format_double(lop_estimate(a_m, a_n, a_kappa)) << '\n';
      return 0;
    };
  });
  auto* cg = apps->add_subcommand("cg", "kappa * delta / 2");
  cg->add_option("--kappa", a_kappa)->required();
  cg->add_option("--delta", a_delta)->required();
  cg->callback([&] {
    action = [&] {
      out << format_double(cg_iterations(a_kappa, a_delta)) << '\n';
      return 0;
    };
  });

  // verify
  bool quick = false;
  auto* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_flag("--quick", quick, "smallest sample counts");
  verify->callback([&] {
    action = [&] {
      return run_verify(out, resolve_threads(g.threads), quick);
    };
  });

  // calibrate
  std::uint64_t c_seed = 977;
  auto* calibrate = app.add_subcommand("calibrate", "freeze calibration constants on a separate seed");
  calibrate->add_option("--calibration-seed", c_seed);
  calibrate->callback([&] {
    action = [&] {
      if (g.out_dir.empty()) throw UsageError("calibrate needs --out <file.json>");
      const int threads = resolve_threads(g.threads);
      ExperimentConfig sm = default_config("smoothed");
      sm.ensemble = gaussian_real();
      sm.n_list = {128};
      sm.master_seed = c_seed;
      ExperimentConfig cond = default_config("condition");
      cond.ensemble = gaussian_real();
      cond.n_list = {256};
      cond.trials = 1000;
      cond.master_seed = c_seed;
      std::map<std::string, double> cal;
      cal["smoothed_median"] = calibrate_smoothed(sm, threads);
      cal["condition_median"] = calibrate_condition(cond, threads);
      cal["lindeberg_C"] = calibrate_lindeberg_c(LindebergDefaults{}, c_seed, threads);
      cal["calibration_seed"] = static_cast<double>(c_seed);
      if (std::filesystem::exists(g.out_dir) && !g.force) {
        throw UsageError(g.out_dir + " exists; pass --force to replace it");
      }
      save_calibration(cal, g.out_dir);
      for (const auto& [k, v] : cal) out << k << " = " << format_double(v) << '\n';
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << app.help();
    return 2;
  }
  try {
    return action ? action() : 2;
  } catch (const SchemaError& e) {
    err << "config error at " << e.field() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

}  // namespace hardedge
