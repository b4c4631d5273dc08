#pragma once

#include <complex>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hardedge/ensembles.hpp"

namespace hardedge {

using cplx = std::complex<double>;

/// Ascending singular values sigma_1 <= ... <= sigma_N of an M x N matrix.
struct SingularSpectrum {
  std::vector<double> values;
  int rows = 0;
  int cols = 0;

  int size() const { return static_cast<int>(values.size()); }
  double smallest() const { return values.front(); }
  double largest() const { return values.back(); }
};

/// Singular values indexed by k in {-N..-1, 1..N} with s_{-k} = -s_k.
/// Only s_1..s_N are stored.
class SymmetrizedSpectrum {
 public:
  SymmetrizedSpectrum() = default;
  /// Validates s_1 >= 0 and non-decreasing order.
  explicit SymmetrizedSpectrum(std::vector<double> positive);
  explicit SymmetrizedSpectrum(const SingularSpectrum& spec);

  int n() const { return static_cast<int>(positive_.size()); }
  double at(int k) const;
  std::span<const double> positive() const { return positive_; }
  /// All 2N values ordered by label -N..-1, 1..N.
  std::vector<double> full() const;

  friend bool operator==(const SymmetrizedSpectrum&, const SymmetrizedSpectrum&) = default;

 private:
  std::vector<double> positive_;
};

/// Position in the 2N-array returned by full() for label k.
inline int label_to_slot(int k, int n) { return k < 0 ? k + n : k + n - 1; }
inline int slot_to_label(int slot, int n) { return slot < n ? slot - n : slot - n + 1; }

/// Semicircle quantiles gamma_k, k in {-N..-1, 1..N}, gamma_{-k} = -gamma_k.
struct TypicalLocations {
  int n = 0;
  std::vector<double> positive;  // gamma_1..gamma_N

  double at(int k) const;
  std::vector<double> full() const;
};

struct SpectralPoint {
  cplx z;
  double xi = 0.0;  // min(|z - 2|, |z + 2|)
  double a = 0.0;   // dist(z, [-2, 2])
  double b = 0.0;   // dist(z, R \ (-2, 2))
};

SpectralPoint make_spectral_point(cplx z);

struct RigidityViolation {
  int k = 0;
  double deviation = 0.0;
  double allowance = 0.0;
};

struct RigidityReport {
  double epsilon = 0.0;
  std::vector<RigidityViolation> violations;
  bool pass = true;
};

SingularSpectrum singular_values(const MatrixSample& a);

/// [[0, A^*], [A, 0]] of size (M + N).
MatrixSample girko_symmetrize(const MatrixSample& a);

struct ConditionNumber {
  double value = 0.0;
  bool infinite = false;
};

/// sigma_N / sigma_1; values below 1e-14 sigma_N count as exact zeros.
ConditionNumber condition_number(const SingularSpectrum& spec);

double rho_sc(double x);
double rho_mp(double x);
double semicircle_cdf(double x);

TypicalLocations gamma_quantiles(int n);

/// Stores under dir/typical_N<n>.csv; load returns nullopt on a missing or
/// mismatched cache file.
void save_typical_locations(const TypicalLocations& t, const std::filesystem::path& dir);
std::optional<TypicalLocations> load_typical_locations(int n, const std::filesystem::path& dir);

/// sqrt(z^2 - 4) as sqrt(z - 2) sqrt(z + 2) with principal roots.
cplx sqrt_z2m4(cplx z);

/// Stieltjes transform of the semicircle law. Throws for real z.
cplx m_sc(cplx z);

/// (1/2N) sum_k 1/(s_k - z).
cplx empirical_stieltjes(const SymmetrizedSpectrum& spec, cplx z);

RigidityReport rigidity_check(const SymmetrizedSpectrum& spec, const TypicalLocations& gammas,
                              double epsilon);
double rigidity_allowance(int k, int n, double epsilon);

/// Characteristic z_t of d_t h = (sqrt(z^2-4)/2) d_z h started at z.
cplx characteristic(cplx z, double t);

struct GeometryDiagnostics {
  enum class Regime { Edge, Bulk } regime = Regime::Bulk;
  double re_shift = 0.0;
  double im_shift = 0.0;
  double re_scale = 0.0;  // edge: t a / xi^{1/2} + t^2; bulk: unused (0)
  double im_scale = 0.0;  // edge: t b / xi^{1/2}; bulk: t
  double re_ratio = 0.0;
  double im_ratio = 0.0;
};

/// Compares z_t - z with the scales of the characteristic-geometry estimates.
/// Edge regime: Im z > 0 and |z - 2| < 1/10. Bulk regime: |E| < 2 and
/// 0 <= Im z <= 1 / (2 - |E|). Anything else throws.
GeometryDiagnostics characteristic_geometry_check(cplx z, double t);

/// Square M x M matrix: M - N fresh columns from `law`, followed by A.
MatrixSample augment_matrix(const MatrixSample& a, const EntryLaw& law, const RngStreamSpec& rng);

void write_spectrum_csv(std::ostream& out, const SymmetrizedSpectrum& spec);
SymmetrizedSpectrum read_spectrum_csv(std::istream& in);

}  // namespace hardedge
