#include "hardedge/kernels.hpp"

namespace hardedge::kernels {
namespace {

double inverse_sum_scalar(double x, std::span<const double> v) {
  double acc = 0.0;
  for (double vi : v) acc += 1.0 / (x - vi);
  return acc;
}

double coupling_sum_scalar(double x, double fx, std::span<const double> v,
                           std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - x;
    acc += (f[i] - fx) / (d * d);
  }
  return acc;
}

double coupling_weight_scalar(double x, std::span<const double> v) {
  double acc = 0.0;
  for (double vi : v) {
    const double d = vi - x;
    acc += 1.0 / (d * d);
  }
  return acc;
}

std::complex<double> stieltjes_sum_scalar(std::complex<double> z, std::span<const double> v,
                                          std::span<const double> w) {
  const double e = z.real();
  const double eta = z.imag();
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - e;
    const double wi = w.empty() ? 1.0 : w[i];
    const double scale = wi / (d * d + eta * eta);
    re += d * scale;
    im += eta * scale;
  }
  return {re, im};
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", inverse_sum_scalar, coupling_sum_scalar,
                                 coupling_weight_scalar, stieltjes_sum_scalar};
  return table;
}

}  // namespace hardedge::kernels
