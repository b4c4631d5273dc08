#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hardedge/rng.hpp"

namespace hardedge {

enum class LawKind { GaussianReal, GaussianComplex, Rademacher, UniformSymmetric, ThreePoint };

std::string to_string(LawKind kind);
LawKind law_kind_from_string(const std::string& name);

/// Distribution of the unscaled entry h (mean 0, variance 1). Matrix entries
/// are h / sqrt(N). For complex laws the real and imaginary parts are drawn
/// independently from the base law and scaled by 1/sqrt(2).
struct EntryLaw {
  LawKind kind = LawKind::GaussianReal;
  bool complex_entries = false;
  std::array<double, 4> moments{0.0, 1.0, 0.0, 3.0};
  double theta = 1.0;  // sub-exponential decay constant; metadata only
  std::vector<double> atoms;
  std::vector<double> probs;

  bool is_complex() const { return complex_entries || kind == LawKind::GaussianComplex; }
  std::string label() const;

  friend bool operator==(const EntryLaw&, const EntryLaw&) = default;
};

EntryLaw gaussian_real();
EntryLaw gaussian_complex();
EntryLaw rademacher(bool complex_entries = false);
EntryLaw uniform_symmetric();
EntryLaw three_point(double atom, double edge_prob);

/// Throws std::invalid_argument when the law violates the normalization or
/// its declared moments do not match its atoms.
void validate(const EntryLaw& law);

/// One draw of the unscaled real variable h.
double draw_entry(const EntryLaw& law, Engine& engine);

struct MatrixSample {
  int rows = 0;
  int cols = 0;
  std::variant<Eigen::MatrixXd, Eigen::MatrixXcd> entries;
  RngStreamSpec seed_path;

  bool is_complex() const { return std::holds_alternative<Eigen::MatrixXcd>(entries); }
  const Eigen::MatrixXd& real() const { return std::get<Eigen::MatrixXd>(entries); }
  const Eigen::MatrixXcd& complex() const { return std::get<Eigen::MatrixXcd>(entries); }
};

MatrixSample make_sample(Eigen::MatrixXd m, RngStreamSpec seed = {});
MatrixSample make_sample(Eigen::MatrixXcd m, RngStreamSpec seed = {});

/// M x N matrix with i.i.d. entries h / sqrt(N). Requires M >= N >= 1.
MatrixSample sample_matrix(const EntryLaw& law, int rows, int cols, const RngStreamSpec& rng);

/// Same, drawing from an existing engine (used by experiment loops that need
/// several matrices per stream).
MatrixSample sample_matrix(const EntryLaw& law, int rows, int cols, Engine& engine);

/// Symmetric three-point law {-a, 0, a} with m1 = m3 = 0, m2 = 1 and
/// |m4 - 3| = gap. Only gaps in [0, 2] are realizable (m4 >= m2^2 = 1).
EntryLaw match_first_three_moments(double target_fourth_gap);

struct TailCheck {
  double threshold = 0.0;
  long long count = 0;
  double bound_fraction = 0.0;  // theta^{-1} exp(-u^theta)
  bool violated = false;
};

struct MomentReport {
  long long samples = 0;
  std::array<double, 4> moments{};
  std::array<double, 4> stderrs{};
  std::array<bool, 4> moment_flags{};
  std::vector<TailCheck> tails;

  bool ok() const;
  std::vector<std::string> violations() const;
};

using EntrySampler = std::function<double(Engine&)>;

/// Empirical moment and tail diagnostics. Never throws on violations; the
/// report flags them. `sampler` overrides the law's own generator.
MomentReport check_assumptions(const EntryLaw& law, long long samples, const RngStreamSpec& rng,
                               const EntrySampler& sampler = {});

}  // namespace hardedge
