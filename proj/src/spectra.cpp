#include "hardedge/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "hardedge/kernels.hpp"
#include "hardedge/linalg.hpp"

namespace hardedge {

using std::numbers::pi;

SymmetrizedSpectrum::SymmetrizedSpectrum(std::vector<double> positive)
    : positive_(std::move(positive)) {
  if (positive_.empty()) throw std::invalid_argument("symmetrized spectrum needs N >= 1");
  if (!(positive_.front() >= 0.0)) throw std::invalid_argument("s_1 must be non-negative");
  for (std::size_t i = 1; i < positive_.size(); ++i) {
    if (!(positive_[i] >= positive_[i - 1])) {
      throw std::invalid_argument("symmetrized spectrum must be non-decreasing");
    }
  }
}

SymmetrizedSpectrum::SymmetrizedSpectrum(const SingularSpectrum& spec)
    : SymmetrizedSpectrum(spec.values) {}

double SymmetrizedSpectrum::at(int k) const {
  if (k == 0 || std::abs(k) > n()) throw std::out_of_range("spectral label out of range");
  return k > 0 ? positive_[static_cast<std::size_t>(k - 1)]
               : -positive_[static_cast<std::size_t>(-k - 1)];
}

namespace {

std::vector<double> mirror(std::span<const double> positive) {
  const std::size_t n = positive.size();
  std::vector<double> out(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[n - 1 - i] = -positive[i];
    out[n + i] = positive[i];
  }
  return out;
}

}  // namespace

std::vector<double> SymmetrizedSpectrum::full() const { return mirror(positive_); }

double TypicalLocations::at(int k) const {
  if (k == 0 || std::abs(k) > n) throw std::out_of_range("quantile label out of range");
  return k > 0 ? positive[static_cast<std::size_t>(k - 1)]
               : -positive[static_cast<std::size_t>(-k - 1)];
}

std::vector<double> TypicalLocations::full() const { return mirror(positive); }

SpectralPoint make_spectral_point(cplx z) {
  SpectralPoint p;
  p.z = z;
  p.xi = std::min(std::abs(z - 2.0), std::abs(z + 2.0));
  const double e = z.real();
  const double eta = std::abs(z.imag());
  const double dx = e > 2.0 ? e - 2.0 : (e < -2.0 ? -2.0 - e : 0.0);
  p.a = std::hypot(dx, eta);
  p.b = std::abs(e) < 2.0 ? p.xi : eta;
  return p;
}

SingularSpectrum singular_values(const MatrixSample& a) {
  SingularSpectrum s;
  s.values = dense_singular_values(a);
  s.rows = a.rows;
  s.cols = a.cols;
  return s;
}

MatrixSample girko_symmetrize(const MatrixSample& a) {
  require_finite(a);
  const int m = a.rows;
  const int n = a.cols;
  if (a.is_complex()) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m + n, m + n);
    out.topRightCorner(n, m) = a.complex().adjoint();
    out.bottomLeftCorner(m, n) = a.complex();
    return make_sample(std::move(out), a.seed_path);
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m + n, m + n);
  out.topRightCorner(n, m) = a.real().transpose();
  out.bottomLeftCorner(m, n) = a.real();
  return make_sample(std::move(out), a.seed_path);
}

ConditionNumber condition_number(const SingularSpectrum& spec) {
  if (spec.values.empty()) throw std::invalid_argument("empty spectrum");
  const double lo = spec.smallest();
  const double hi = spec.largest();
  if (lo <= 1e-14 * hi) return {std::numeric_limits<double>::infinity(), true};
  return {hi / lo, false};
}

double rho_sc(double x) {
  const double v = 4.0 - x * x;
  return v > 0.0 ? std::sqrt(v) / (2.0 * pi) : 0.0;
}

double rho_mp(double x) {
  if (!(x > 0.0) || x >= 4.0) return 0.0;
  return std::sqrt((4.0 - x) / x) / (2.0 * pi);
}

double semicircle_cdf(double x) {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  return 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * pi) + std::asin(x / 2.0) / pi;
}

TypicalLocations gamma_quantiles(int n) {
  if (n < 1) throw std::invalid_argument("gamma_quantiles needs N >= 1");
  TypicalLocations t;
  t.n = n;
  t.positive.resize(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const double target = static_cast<double>(n + k) / (2.0 * n);
    if (k == n) {
      t.positive.back() = 2.0;
      continue;
    }
    double lo = 0.0;
    double hi = 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (semicircle_cdf(mid) < target ? lo : hi) = mid;
    }
    t.positive[static_cast<std::size_t>(k - 1)] = 0.5 * (lo + hi);
  }
  return t;
}

void save_typical_locations(const TypicalLocations& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / ("typical_N" + std::to_string(t.n) + ".csv"));
  out.precision(17);
  out << "k,gamma_k\n";
  for (int k = 1; k <= t.n; ++k) out << k << ',' << t.at(k) << '\n';
}

std::optional<TypicalLocations> load_typical_locations(int n, const std::filesystem::path& dir) {
  std::ifstream in(dir / ("typical_N" + std::to_string(n) + ".csv"));
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  TypicalLocations t;
  t.n = n;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) return std::nullopt;
    t.positive.push_back(std::stod(line.substr(comma + 1)));
  }
  if (static_cast<int>(t.positive.size()) != n) return std::nullopt;
  return t;
}

cplx sqrt_z2m4(cplx z) { return std::sqrt(z - 2.0) * std::sqrt(z + 2.0); }

cplx m_sc(cplx z) {
  if (z.imag() == 0.0) throw std::invalid_argument("m_sc needs Im z != 0");
  return (-z + sqrt_z2m4(z)) / 2.0;
}

cplx empirical_stieltjes(const SymmetrizedSpectrum& spec, cplx z) {
  if (z.imag() == 0.0) {
    for (double s : spec.positive()) {
      if (s == std::abs(z.real())) throw std::invalid_argument("z collides with a singular value");
    }
  }
  const auto full = spec.full();
  return kernels::stieltjes_sum(z, full) / (2.0 * spec.n());
}

double rigidity_allowance(int k, int n, double epsilon) {
  return std::pow(static_cast<double>(n), -2.0 / 3.0 + epsilon) *
         std::pow(static_cast<double>(n + 1 - std::abs(k)), -1.0 / 3.0);
}

RigidityReport rigidity_check(const SymmetrizedSpectrum& spec, const TypicalLocations& gammas,
                              double epsilon) {
  if (spec.n() != gammas.n) throw std::invalid_argument("spectrum and quantiles differ in N");
  RigidityReport r;
  r.epsilon = epsilon;
  const int n = spec.n();
  for (int k = -n; k <= n; ++k) {
    if (k == 0) continue;
    const double dev = std::abs(spec.at(k) - gammas.at(k));
    const double allow = rigidity_allowance(k, n, epsilon);
    if (!(dev < allow)) r.violations.push_back({k, dev, allow});
  }
  r.pass = r.violations.empty();
  return r;
}

cplx characteristic(cplx z, double t) {
  if (t < 0.0) throw std::invalid_argument("characteristic needs t >= 0");
  const cplx root = sqrt_z2m4(z);
  return (std::exp(t / 2.0) * (z + root) + std::exp(-t / 2.0) * (z - root)) / 2.0;
}

GeometryDiagnostics characteristic_geometry_check(cplx z, double t) {
  GeometryDiagnostics d;
  const SpectralPoint p = make_spectral_point(z);
  const cplx shift = characteristic(z, t) - z;
  d.re_shift = shift.real();
  d.im_shift = shift.imag();
  const double e = z.real();
  const double eta = z.imag();
  if (eta > 0.0 && std::abs(z - 2.0) < 0.1) {
    d.regime = GeometryDiagnostics::Regime::Edge;
    const double root_xi = std::sqrt(p.xi);
    d.re_scale = t * p.a / root_xi + t * t;
    d.im_scale = t * p.b / root_xi;
  } else if (std::abs(e) < 2.0 && eta >= 0.0 && eta <= 1.0 / (2.0 - std::abs(e))) {
    d.regime = GeometryDiagnostics::Regime::Bulk;
    d.im_scale = t;
  } else {
    throw std::invalid_argument("z is outside both the edge and the bulk regime");
  }
  d.re_ratio = d.re_scale > 0.0 ? d.re_shift / d.re_scale : 0.0;
  d.im_ratio = d.im_scale > 0.0 ? d.im_shift / d.im_scale : 0.0;
  return d;
}

MatrixSample augment_matrix(const MatrixSample& a, const EntryLaw& law, const RngStreamSpec& rng) {
  validate(law);
  if (a.rows < a.cols) throw std::invalid_argument("augment_matrix needs M >= N");
  if (a.rows == a.cols) return a;
  if (law.is_complex() != a.is_complex()) {
    throw std::invalid_argument("augmentation law must match the matrix field");
  }
  const int m = a.rows;
  const int extra = m - a.cols;
  Engine engine = make_engine(rng);
  // Fresh columns use the same 1/sqrt(N) scale as A.
  const double scale = 1.0 / std::sqrt(static_cast<double>(a.cols));
  if (a.is_complex()) {
    Eigen::MatrixXcd out(m, m);
    const double part = scale / std::sqrt(2.0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < extra; ++j) {
        const double re = draw_entry(law, engine);
        const double im = draw_entry(law, engine);
        out(i, j) = {part * re, part * im};
      }
    }
    out.rightCols(a.cols) = a.complex();
    return make_sample(std::move(out), rng);
  }
  Eigen::MatrixXd out(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < extra; ++j) out(i, j) = scale * draw_entry(law, engine);
  }
  out.rightCols(a.cols) = a.real();
  return make_sample(std::move(out), rng);
}

void write_spectrum_csv(std::ostream& out, const SymmetrizedSpectrum& spec) {
  const auto old = out.precision(17);
  out << "k,s_k\n";
  const int n = spec.n();
  for (int k = -n; k <= n; ++k) {
    if (k != 0) out << k << ',' << spec.at(k) << '\n';
  }
  out.precision(old);
}

SymmetrizedSpectrum read_spectrum_csv(std::istream& in) {
  std::string line;
  std::getline(in, line);
  std::vector<double> positive;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int k = 0;
    char comma = 0;
    double s = 0.0;
    row >> k >> comma >> s;
    if (!row || comma != ',') throw std::invalid_argument("malformed spectrum row: " + line);
    if (k > 0) positive.push_back(s);
  }
  return SymmetrizedSpectrum(std::move(positive));
}

}  // namespace hardedge
