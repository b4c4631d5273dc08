#include "hardedge/ensembles.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hardedge {

namespace {

constexpr double kMomentTol = 1e-12;

std::array<double, 4> atom_moments(const std::vector<double>& atoms,
                                   const std::vector<double>& probs) {
  std::array<double, 4> m{};
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    double pw = 1.0;
    for (int k = 0; k < 4; ++k) {
      pw *= atoms[i];
      m[k] += probs[i] * pw;
    }
  }
  return m;
}

}  // namespace

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::GaussianReal: return "gaussian-real";
    case LawKind::GaussianComplex: return "gaussian-complex";
    case LawKind::Rademacher: return "rademacher";
    case LawKind::UniformSymmetric: return "uniform-symmetric";
    case LawKind::ThreePoint: return "three-point";
  }
  return "unknown";
}

LawKind law_kind_from_string(const std::string& name) {
  if (name == "gaussian-real" || name == "gaussian") return LawKind::GaussianReal;
  if (name == "gaussian-complex") return LawKind::GaussianComplex;
  if (name == "rademacher" || name == "bernoulli") return LawKind::Rademacher;
  if (name == "uniform-symmetric" || name == "uniform") return LawKind::UniformSymmetric;
  if (name == "three-point") return LawKind::ThreePoint;
  throw std::invalid_argument("unknown entry law kind '" + name + "'");
}

std::string EntryLaw::label() const {
  if (kind == LawKind::GaussianComplex) return to_string(kind);
  return to_string(kind) + (complex_entries ? "-complex" : "");
}

EntryLaw gaussian_real() { return {}; }

EntryLaw gaussian_complex() {
  EntryLaw law;
  law.kind = LawKind::GaussianComplex;
  law.complex_entries = true;
  return law;
}

EntryLaw rademacher(bool complex_entries) {
  EntryLaw law;
  law.kind = LawKind::Rademacher;
  law.complex_entries = complex_entries;
  law.moments = {0.0, 1.0, 0.0, 1.0};
  return law;
}

EntryLaw uniform_symmetric() {
  EntryLaw law;
  law.kind = LawKind::UniformSymmetric;
  law.moments = {0.0, 1.0, 0.0, 9.0 / 5.0};
  return law;
}

EntryLaw three_point(double atom, double edge_prob) {
  EntryLaw law;
  law.kind = LawKind::ThreePoint;
  law.atoms = {-atom, 0.0, atom};
  law.probs = {edge_prob, 1.0 - 2.0 * edge_prob, edge_prob};
  law.moments = atom_moments(law.atoms, law.probs);
  return law;
}

void validate(const EntryLaw& law) {
  if (std::abs(law.moments[0]) > kMomentTol) {
    throw std::invalid_argument("entry law must have mean 0, got m1 = " +
                                std::to_string(law.moments[0]));
  }
  if (std::abs(law.moments[1] - 1.0) > kMomentTol) {
    throw std::invalid_argument("entry law must have variance 1 before scaling, got m2 = " +
                                std::to_string(law.moments[1]));
  }
  if (!(law.theta > 0.0)) throw std::invalid_argument("decay constant theta must be positive");
  if (law.kind == LawKind::GaussianComplex && !law.complex_entries) {
    throw std::invalid_argument("gaussian-complex law must be flagged complex");
  }
  if (law.kind == LawKind::ThreePoint) {
    if (law.atoms.size() != 3 || law.probs.size() != 3) {
      throw std::invalid_argument("three-point law needs exactly three atoms and probabilities");
    }
    double total = 0.0;
    for (double p : law.probs) {
      if (p < 0.0) throw std::invalid_argument("three-point law has a negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > kMomentTol) {
      throw std::invalid_argument("three-point probabilities must sum to 1");
    }
    const auto m = atom_moments(law.atoms, law.probs);
    for (int k = 0; k < 4; ++k) {
      if (std::abs(m[k] - law.moments[k]) > 1e-10) {
        throw std::invalid_argument("three-point atoms do not realize declared moment m" +
                                    std::to_string(k + 1));
      }
    }
  }
}

double draw_entry(const EntryLaw& law, Engine& engine) {
  switch (law.kind) {
    case LawKind::GaussianReal:
    case LawKind::GaussianComplex: {
      std::normal_distribution<double> normal(0.0, 1.0);
      return normal(engine);
    }
    case LawKind::Rademacher:
      return (engine() >> 63) != 0 ? 1.0 : -1.0;
    case LawKind::UniformSymmetric: {
      const double half_width = std::sqrt(3.0);
      std::uniform_real_distribution<double> u(-half_width, half_width);
      return u(engine);
    }
    case LawKind::ThreePoint: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double x = u(engine);
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < law.atoms.size(); ++i) {
        acc += law.probs[i];
        if (x < acc) return law.atoms[i];
      }
      return law.atoms.back();
    }
  }
  throw std::logic_error("unhandled law kind");
}

MatrixSample make_sample(Eigen::MatrixXd m, RngStreamSpec seed) {
  MatrixSample s;
  s.rows = static_cast<int>(m.rows());
  s.cols = static_cast<int>(m.cols());
  s.entries = std::move(m);
  s.seed_path = std::move(seed);
  return s;
}

MatrixSample make_sample(Eigen::MatrixXcd m, RngStreamSpec seed) {
  MatrixSample s;
  s.rows = static_cast<int>(m.rows());
  s.cols = static_cast<int>(m.cols());
  s.entries = std::move(m);
  s.seed_path = std::move(seed);
  return s;
}

MatrixSample sample_matrix(const EntryLaw& law, int rows, int cols, Engine& engine) {
  if (cols < 1 || rows < cols) {
    throw std::invalid_argument("sample_matrix requires M >= N >= 1, got M = " +
                                std::to_string(rows) + ", N = " + std::to_string(cols));
  }
  validate(law);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  if (law.is_complex()) {
    const double part = scale / std::sqrt(2.0);
    Eigen::MatrixXcd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const double re = draw_entry(law, engine);
        const double im = draw_entry(law, engine);
        m(i, j) = {part * re, part * im};
      }
    }
    return make_sample(std::move(m));
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = scale * draw_entry(law, engine);
  }
  return make_sample(std::move(m));
}

MatrixSample sample_matrix(const EntryLaw& law, int rows, int cols, const RngStreamSpec& rng) {
  Engine engine = make_engine(rng);
  MatrixSample s = sample_matrix(law, rows, cols, engine);
  s.seed_path = rng;
  return s;
}

EntryLaw match_first_three_moments(double target_fourth_gap) {
  if (!(target_fourth_gap >= 0.0)) {
    throw std::invalid_argument("fourth-moment gap must be non-negative");
  }
  const double m4 = 3.0 - target_fourth_gap;
  if (m4 < 1.0) {
    throw std::invalid_argument(
        "fourth-moment gap " + std::to_string(target_fourth_gap) + " needs m4 = " +
        std::to_string(m4) + ", but any law with m2 = 1 has m4 >= m2^2 = 1");
  }
  // m2 = 2 p a^2 = 1 and m4 = 2 p a^4 give a^2 = m4, p = 1 / (2 m4).
  return three_point(std::sqrt(m4), 0.5 / m4);
}

bool MomentReport::ok() const { return violations().empty(); }

std::vector<std::string> MomentReport::violations() const {
  static const char* names[4] = {"mean", "variance", "third moment", "fourth moment"};
  std::vector<std::string> out;
  for (int k = 0; k < 4; ++k) {
    if (moment_flags[k]) out.emplace_back(names[k]);
  }
  for (const auto& t : tails) {
    if (t.violated) out.push_back("tail at u=" + std::to_string(t.threshold));
  }
  return out;
}

MomentReport check_assumptions(const EntryLaw& law, long long samples, const RngStreamSpec& rng,
                               const EntrySampler& sampler) {
  if (samples < 1000) throw std::invalid_argument("check_assumptions needs at least 1000 samples");
  Engine engine = make_engine(rng);
  const std::array<double, 3> thresholds{2.0, 4.0, 8.0};

  // Running sums of h^k for k = 1..8 give the moments and their standard errors.
  std::array<double, 8> sums{};
  std::array<long long, 3> exceed{};
  for (long long i = 0; i < samples; ++i) {
    const double h = sampler ? sampler(engine) : draw_entry(law, engine);
    double pw = 1.0;
    for (int k = 0; k < 8; ++k) {
      pw *= h;
      sums[k] += pw;
    }
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
      if (std::abs(h) > thresholds[j]) ++exceed[j];
    }
  }

  MomentReport report;
  report.samples = samples;
  const double n = static_cast<double>(samples);
  for (int k = 0; k < 4; ++k) {
    const double mean = sums[k] / n;
    const double second = sums[2 * k + 1] / n;
    const double var = std::max(0.0, second - mean * mean);
    report.moments[k] = mean;
    report.stderrs[k] = std::sqrt(var / n);
    const double allowed = std::max(3.0 * report.stderrs[k], kMomentTol);
    report.moment_flags[k] = std::abs(mean - law.moments[k]) > allowed;
  }
  for (std::size_t j = 0; j < thresholds.size(); ++j) {
    TailCheck t;
    t.threshold = thresholds[j];
    t.count = exceed[j];
    t.bound_fraction = std::exp(-std::pow(thresholds[j], law.theta)) / law.theta;
    const double p = std::min(1.0, t.bound_fraction);
    const double expected = n * p;
    t.violated = static_cast<double>(t.count) > expected + 3.0 * std::sqrt(expected * (1.0 - p)) + 1.0;
    report.tails.push_back(t);
  }
  return report;
}

}  // namespace hardedge
