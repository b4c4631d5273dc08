// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.

#include <immintrin.h>

#include "hardedge/kernels.hpp"

namespace hardedge::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double inverse_sum_avx2(double x, std::span<const double> v) {
  const std::size_t n = v.size();
  const double* p = v.data();
  const __m256d vx = _mm256_set1_pd(x);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(vx, _mm256_loadu_pd(p + i));
    const __m256d d1 = _mm256_sub_pd(vx, _mm256_loadu_pd(p + i + 4));
    acc0 = _mm256_add_pd(acc0, _mm256_div_pd(one, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_div_pd(one, d1));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_div_pd(one, _mm256_sub_pd(vx, _mm256_loadu_pd(p + i))));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += 1.0 / (x - p[i]);
  return acc;
}

double coupling_sum_avx2(double x, double fx, std::span<const double> v,
                         std::span<const double> f) {
  const std::size_t n = v.size();
  const double* pv = v.data();
  const double* pf = f.data();
  const __m256d vx = _mm256_set1_pd(x);
  const __m256d vfx = _mm256_set1_pd(fx);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pv + i), vx);
    const __m256d num = _mm256_sub_pd(_mm256_loadu_pd(pf + i), vfx);
    acc = _mm256_add_pd(acc, _mm256_div_pd(num, _mm256_mul_pd(d, d)));
  }
  double out = hsum(acc);
  for (; i < n; ++i) {
    const double d = pv[i] - x;
    out += (pf[i] - fx) / (d * d);
  }
  return out;
}

double coupling_weight_avx2(double x, std::span<const double> v) {
  const std::size_t n = v.size();
  const double* p = v.data();
  const __m256d vx = _mm256_set1_pd(x);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), vx);
    acc = _mm256_add_pd(acc, _mm256_div_pd(one, _mm256_mul_pd(d, d)));
  }
  double out = hsum(acc);
  for (; i < n; ++i) {
    const double d = p[i] - x;
    out += 1.0 / (d * d);
  }
  return out;
}

std::complex<double> stieltjes_sum_avx2(std::complex<double> z, std::span<const double> v,
                                        std::span<const double> w) {
  const std::size_t n = v.size();
  const double* pv = v.data();
  const double* pw = w.data();
  const bool unit = w.empty();
  const __m256d ve = _mm256_set1_pd(z.real());
  const __m256d veta = _mm256_set1_pd(z.imag());
  const __m256d eta2 = _mm256_mul_pd(veta, veta);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d re = _mm256_setzero_pd();
  __m256d im = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pv + i), ve);
    const __m256d den = _mm256_fmadd_pd(d, d, eta2);
    const __m256d wi = unit ? one : _mm256_loadu_pd(pw + i);
    const __m256d scale = _mm256_div_pd(wi, den);
    re = _mm256_fmadd_pd(d, scale, re);
    im = _mm256_fmadd_pd(veta, scale, im);
  }
  double sre = hsum(re);
  double sim = hsum(im);
  const double e = z.real();
  const double eta = z.imag();
  for (; i < n; ++i) {
    const double d = pv[i] - e;
    const double scale = (unit ? 1.0 : pw[i]) / (d * d + eta * eta);
    sre += d * scale;
    sim += eta * scale;
  }
  return {sre, sim};
}

}  // namespace

namespace detail {
const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{"avx2", inverse_sum_avx2, coupling_sum_avx2,
                                 coupling_weight_avx2, stieltjes_sum_avx2};
  return table;
}
}  // namespace detail

}  // namespace hardedge::kernels
