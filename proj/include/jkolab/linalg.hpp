#ifndef JKOLAB_LINALG_HPP
#define JKOLAB_LINALG_HPP

#include "jkolab/types.hpp"

#include <algorithm>
#include <cmath>

namespace jkolab {

/// Eigenvalues below this are clamped before taking roots.
inline constexpr double kEigenClamp = 1e-14;

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return Mat<Scalar>(Scalar(0.5) * (m + m.transpose()));
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, static_cast<double>(m.cwiseAbs().maxCoeff()));
  return static_cast<double>((m - m.transpose()).cwiseAbs().maxCoeff()) <= rel_tol * scale;
}

/// Applies f to the (clamped) spectrum of a symmetric matrix.
template <typename Derived, typename F>
auto spectral_apply(const Eigen::MatrixBase<Derived>& m, F&& f) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(m));
  Vec<Scalar> ev = es.eigenvalues().unaryExpr([](Scalar x) {
    return std::max(x, static_cast<Scalar>(kEigenClamp));
  });
  ev = ev.unaryExpr(f);
  const auto& u = es.eigenvectors();
  return Mat<Scalar>(u * ev.asDiagonal() * u.transpose());
}

/// Principal square root of a symmetric PSD matrix; negative round-off
/// eigenvalues are clamped to zero.
template <typename Derived>
auto sqrtm_psd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(m));
  Vec<Scalar> ev = es.eigenvalues().unaryExpr([](Scalar x) {
    return std::sqrt(std::max(x, Scalar(0)));
  });
  const auto& u = es.eigenvectors();
  return Mat<Scalar>(u * ev.asDiagonal() * u.transpose());
}

template <typename Derived>
auto inv_sqrtm_spd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return spectral_apply(m, [](Scalar x) { return Scalar(1) / std::sqrt(x); });
}

template <typename Derived>
auto min_eigenvalue(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return static_cast<Scalar>(es.eigenvalues().minCoeff());
}

template <typename Derived>
auto log_det_spd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<Mat<Scalar>> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) throw PreconditionError("log_det_spd: matrix is not positive definite");
  return Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

/// Largest singular value (spectral norm).
template <typename Derived>
auto spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  Eigen::JacobiSVD<Mat<Scalar>> svd(m);
  return static_cast<Scalar>(svd.singularValues()(0));
}

}  // namespace jkolab

#endif  // JKOLAB_LINALG_HPP
