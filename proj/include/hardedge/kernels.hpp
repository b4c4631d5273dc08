#pragma once

// Data-parallel inner loops shared by the spectral and dynamics code.
//
// Every kernel has a portable scalar reference implementation and, on x86-64
// builds, an AVX2/FMA variant. The variant is chosen once at startup from the
// CPU feature bits; HARDEDGE_KERNELS=scalar in the environment forces the
// reference path. Variants agree with the reference up to summation order.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace hardedge::kernels {

struct KernelTable {
  std::string_view name;

  // sum_i 1 / (x - v_i)
  double (*inverse_sum)(double x, std::span<const double> v);

  // sum_i (f_i - fx) / (v_i - x)^2
  double (*coupling_sum)(double x, double fx, std::span<const double> v,
                         std::span<const double> f);

  // sum_i 1 / (v_i - x)^2
  double (*coupling_weight)(double x, std::span<const double> v);

  // sum_i w_i / (v_i - z); an empty w means unit weights.
  std::complex<double> (*stieltjes_sum)(std::complex<double> z, std::span<const double> v,
                                        std::span<const double> w);
};

const KernelTable& scalar_table();

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table used by the library. Resolved on first call.
const KernelTable& active();

inline double inverse_sum(double x, std::span<const double> v) {
  return active().inverse_sum(x, v);
}
inline double coupling_sum(double x, double fx, std::span<const double> v,
                           std::span<const double> f) {
  return active().coupling_sum(x, fx, v, f);
}
inline double coupling_weight(double x, std::span<const double> v) {
  return active().coupling_weight(x, v);
}
inline std::complex<double> stieltjes_sum(std::complex<double> z, std::span<const double> v,
                                          std::span<const double> w = {}) {
  return active().stieltjes_sum(z, v, w);
}

}  // namespace hardedge::kernels
