#include "hardedge/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace hardedge {

namespace {

// Largest eigenvalue of a Hermitian positive semi-definite operator by
// Lanczos with full reorthogonalization.
template <class Scalar>
double lanczos_top(int n, const std::function<Eigen::Matrix<Scalar, -1, 1>(
                              const Eigen::Matrix<Scalar, -1, 1>&)>& apply) {
  using Vec = Eigen::Matrix<Scalar, -1, 1>;
  const int max_iter = n;
  std::vector<Vec> basis;
  basis.reserve(static_cast<std::size_t>(std::min(max_iter, 128)));
  std::vector<double> alpha;
  std::vector<double> beta;

  // Fixed, non-degenerate start vector.
  Vec q(n);
  for (int i = 0; i < n; ++i) q[i] = Scalar(1.0 + 0.37 * std::sin(1.3 * i + 0.2));
  q.normalize();

  double theta = 0.0;
  for (int m = 0; m < max_iter; ++m) {
    basis.push_back(q);
    Vec w = apply(q);
    const double a = std::real(q.dot(w));
    alpha.push_back(a);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vec& b : basis) w -= b * b.dot(w);
    }
    const double b = w.norm();

    const int k = static_cast<int>(alpha.size());
    Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd sub(std::max(k - 1, 0));
    for (int i = 0; i + 1 < k; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
    double residual = b;
    if (k == 1) {
      theta = diag[0];
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      theta = tri.eigenvalues()[k - 1];
      residual = b * std::abs(tri.eigenvectors()(k - 1, k - 1));
    }
    if (!std::isfinite(theta)) return theta;
    if (residual <= 1e-10 * std::abs(theta) || b <= 1e-300 || k == n) break;
    beta.push_back(b);
    q = w / b;
  }
  return theta;
}

template <class Mat>
double smallest_sv_impl(const Mat& a) {
  using Scalar = typename Mat::Scalar;
  using Vec = Eigen::Matrix<Scalar, -1, 1>;
  const int n = static_cast<int>(a.cols());
  double top = 0.0;
  if (a.rows() == a.cols()) {
    Eigen::PartialPivLU<Mat> lu(a);
    const auto& lu_mat = lu.matrixLU();
    for (int i = 0; i < n; ++i) {
      if (std::abs(lu_mat(i, i)) == 0.0) return 0.0;
    }
    top = lanczos_top<Scalar>(n, [&](const Vec& x) -> Vec {
      Vec y = lu.adjoint().solve(x);
      return lu.solve(y);
    });
  } else {
    Eigen::HouseholderQR<Mat> qr(a);
    const Mat r = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i) {
      if (std::abs(r(i, i)) == 0.0) return 0.0;
    }
    const auto upper = r.template triangularView<Eigen::Upper>();
    top = lanczos_top<Scalar>(n, [&](const Vec& x) -> Vec {
      Vec y = upper.adjoint().solve(x);
      return upper.solve(y);
    });
  }
  if (!std::isfinite(top) || top <= 0.0) return 0.0;
  return 1.0 / std::sqrt(top);
}

template <class Mat>
double largest_sv_impl(const Mat& a) {
  using Scalar = typename Mat::Scalar;
  using Vec = Eigen::Matrix<Scalar, -1, 1>;
  const int n = static_cast<int>(a.cols());
  const double top = lanczos_top<Scalar>(n, [&](const Vec& x) -> Vec {
    Vec y = a * x;
    return a.adjoint() * y;
  });
  return std::sqrt(std::max(top, 0.0));
}

template <class Mat>
std::vector<double> svd_impl(const Mat& a) {
  Eigen::BDCSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void require_finite(const MatrixSample& a) {
  const bool finite = a.is_complex() ? a.complex().allFinite() : a.real().allFinite();
  if (!finite) throw std::invalid_argument("matrix has non-finite entries");
}

std::vector<double> dense_singular_values(const MatrixSample& a) {
  require_finite(a);
  return a.is_complex() ? svd_impl(a.complex()) : svd_impl(a.real());
}

std::vector<double> hermitian_eigenvalues(const MatrixSample& a) {
  require_finite(a);
  if (a.rows != a.cols) throw std::invalid_argument("hermitian_eigenvalues needs a square matrix");
  std::vector<double> out;
  if (a.is_complex()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a.complex(), Eigen::EigenvaluesOnly);
    out.assign(es.eigenvalues().data(), es.eigenvalues().data() + a.rows);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.real(), Eigen::EigenvaluesOnly);
    out.assign(es.eigenvalues().data(), es.eigenvalues().data() + a.rows);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double smallest_singular_value(const MatrixSample& a) {
  require_finite(a);
  return a.is_complex() ? smallest_sv_impl(a.complex()) : smallest_sv_impl(a.real());
}

double largest_singular_value(const MatrixSample& a) {
  require_finite(a);
  return a.is_complex() ? largest_sv_impl(a.complex()) : largest_sv_impl(a.real());
}

ExtremeSingularValues extreme_singular_values(const MatrixSample& a) {
  return {smallest_singular_value(a), largest_singular_value(a)};
}

}  // namespace hardedge
