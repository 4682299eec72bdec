#ifndef JKOLAB_GAUSSIAN_HPP
#define JKOLAB_GAUSSIAN_HPP

// Closed-form Bures-Wasserstein geometry on N(m, Σ).

#include "jkolab/linalg.hpp"
#include "jkolab/objective.hpp"
#include "jkolab/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jkolab {

/// Smallest covariance eigenvalue accepted by entropy-bearing operations.
inline constexpr double kNondegenerateEig = 1e-10;

template <typename Scalar>
class GaussianMeasure {
 public:
  GaussianMeasure() = default;

  /// Symmetrizes cov after checking symmetry to 1e-12 relative; rejects
  /// negative eigenvalues beyond round-off.
  GaussianMeasure(Vec<Scalar> mean, const Mat<Scalar>& cov) : mean_(std::move(mean)) {
    require(cov.rows() == cov.cols() && cov.rows() == mean_.size() && mean_.size() > 0,
            "GaussianMeasure: dimension mismatch");
    require(mean_.allFinite() && cov.allFinite(), "GaussianMeasure: non-finite parameters");
    require(is_symmetric(cov), "GaussianMeasure: covariance is not symmetric");
    cov_ = symmetrized(cov);
    const Scalar scale = std::max(Scalar(1), cov_.cwiseAbs().maxCoeff());
    require(min_eigenvalue(cov_) >= -Scalar(1e-12) * scale,
            "GaussianMeasure: covariance is not positive semi-definite");
  }

  static GaussianMeasure point_mass(Vec<Scalar> at) {
    const auto d = at.size();
    return GaussianMeasure(std::move(at), Mat<Scalar>::Zero(d, d));
  }

  static GaussianMeasure scalar(Scalar mean, Scalar variance) {
    return GaussianMeasure(Vec<Scalar>::Constant(1, mean), Mat<Scalar>::Constant(1, 1, variance));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vec<Scalar>& mean() const { return mean_; }
  const Mat<Scalar>& cov() const { return cov_; }

  bool is_nondegenerate() const { return min_eigenvalue(cov_) >= static_cast<Scalar>(kNondegenerateEig); }

  bool operator==(const GaussianMeasure& o) const { return mean_ == o.mean_ && cov_ == o.cov_; }

 private:
  Vec<Scalar> mean_;
  Mat<Scalar> cov_;
};

/// x ↦ A x + b. Used both for transports and for affine vector fields.
template <typename Scalar>
struct AffineMap {
  Mat<Scalar> linear;
  Vec<Scalar> offset;

  static AffineMap identity(Eigen::Index d) {
    return {Mat<Scalar>::Identity(d, d), Vec<Scalar>::Zero(d)};
  }
  static AffineMap zero(Eigen::Index d) { return {Mat<Scalar>::Zero(d, d), Vec<Scalar>::Zero(d)}; }

  Eigen::Index dim() const { return offset.size(); }
  Vec<Scalar> operator()(const Vec<Scalar>& x) const { return linear * x + offset; }

  AffineMap operator+(const AffineMap& o) const { return {linear + o.linear, offset + o.offset}; }
  AffineMap operator-(const AffineMap& o) const { return {linear - o.linear, offset - o.offset}; }
  AffineMap operator*(Scalar s) const { return {linear * s, offset * s}; }
  bool operator==(const AffineMap& o) const { return linear == o.linear && offset == o.offset; }
};

/// (f ∘ g)(x) = f(g(x)).
template <typename Scalar>
AffineMap<Scalar> compose(const AffineMap<Scalar>& f, const AffineMap<Scalar>& g) {
  return {f.linear * g.linear, f.linear * g.offset + f.offset};
}

template <typename Scalar>
AffineMap<Scalar> inverse(const AffineMap<Scalar>& t) {
  Eigen::FullPivLU<Mat<Scalar>> lu(t.linear);
  require(lu.isInvertible(), "inverse: affine map is singular");
  Mat<Scalar> inv = lu.inverse();
  return {inv, -inv * t.offset};
}

template <typename Scalar>
GaussianMeasure<Scalar> pushforward(const GaussianMeasure<Scalar>& g, const AffineMap<Scalar>& t) {
  require(t.dim() == g.dim(), "pushforward: dimension mismatch");
  Mat<Scalar> cov = t.linear * g.cov() * t.linear.transpose();
  return GaussianMeasure<Scalar>(t(g.mean()), symmetrized(cov));
}

template <typename Scalar>
Scalar w2_bw_squared(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
  require(g1.dim() == g2.dim(), "w2_bw: dimension mismatch");
  const Mat<Scalar> s2 = sqrtm_psd(g2.cov());
  const Mat<Scalar> cross = sqrtm_psd(Mat<Scalar>(s2 * g1.cov() * s2));
  const Scalar tr = (g1.cov() + g2.cov() - Scalar(2) * cross).trace();
  return std::max(Scalar(0), (g1.mean() - g2.mean()).squaredNorm() + tr);
}

template <typename Scalar>
Scalar w2_bw(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
  return std::sqrt(w2_bw_squared(g1, g2));
}

/// Linear part of the Brenier map N(0, Σ1) → N(0, Σ2).
template <typename Scalar>
Mat<Scalar> bw_transport_matrix(const Mat<Scalar>& cov1, const Mat<Scalar>& cov2) {
  const Mat<Scalar> r = sqrtm_psd(cov1);
  const Mat<Scalar> ri = inv_sqrtm_spd(cov1);
  const Mat<Scalar> mid = sqrtm_psd(Mat<Scalar>(r * cov2 * r));
  return symmetrized(Mat<Scalar>(ri * mid * ri));
}

template <typename Scalar>
AffineMap<Scalar> ot_map_bw(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
  require(g1.dim() == g2.dim(), "ot_map_bw: dimension mismatch");
  require(g1.is_nondegenerate(), "ot_map_bw: source covariance is singular");
  AffineMap<Scalar> t;
  t.linear = bw_transport_matrix(g1.cov(), g2.cov());
  t.offset = g2.mean() - t.linear * g1.mean();
  return t;
}

/// ∫ ρ log ρ for a nondegenerate Gaussian.
template <typename Scalar>
Scalar entropy(const GaussianMeasure<Scalar>& g) {
  require(g.is_nondegenerate(), "entropy: degenerate Gaussian has infinite entropy");
  const auto d = static_cast<Scalar>(g.dim());
  return -Scalar(0.5) * d * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * std::numbers::e_v<Scalar>) -
         Scalar(0.5) * log_det_spd(g.cov());
}

/// E_g[V] for the quadratic potential.
template <typename Scalar>
Scalar potential_energy(const GaussianMeasure<Scalar>& g, const QuadraticPotential<Scalar>& v) {
  require(v.dim() == g.dim(), "potential_energy: dimension mismatch");
  const Vec<Scalar> r = g.mean() - v.center;
  return Scalar(0.5) * ((v.lambda_mat * g.cov()).trace() + r.dot(v.lambda_mat * r));
}

/// KL(g1 ‖ g2), both nondegenerate.
template <typename Scalar>
Scalar kl_between(const GaussianMeasure<Scalar>& g1, const GaussianMeasure<Scalar>& g2) {
  require(g1.dim() == g2.dim(), "kl_between: dimension mismatch");
  require(g1.is_nondegenerate() && g2.is_nondegenerate(), "kl_between: degenerate Gaussian");
  Eigen::LLT<Mat<Scalar>> llt(g2.cov());
  const Vec<Scalar> dm = g2.mean() - g1.mean();
  const Scalar tr = llt.solve(g1.cov()).trace();
  const Scalar quad = dm.dot(llt.solve(dm));
  const auto d = static_cast<Scalar>(g1.dim());
  const Scalar v = Scalar(0.5) * (tr + quad - d + log_det_spd(g2.cov()) - log_det_spd(g1.cov()));
  return std::max(Scalar(0), v);
}

/// KL(g ‖ q) with q = N(center, Λ⁻¹).
template <typename Scalar>
Scalar kl_gaussian(const GaussianMeasure<Scalar>& g, const ObjectiveSpec<Scalar>& spec) {
  require(spec.dim() == g.dim(), "kl_gaussian: dimension mismatch");
  require(g.is_nondegenerate(), "kl_gaussian: degenerate Gaussian");
  const auto& lam = spec.potential.lambda_mat;
  const Vec<Scalar> r = g.mean() - spec.potential.center;
  const auto d = static_cast<Scalar>(g.dim());
  const Scalar v = Scalar(0.5) * ((lam * g.cov()).trace() + r.dot(lam * r) - d -
                                  log_det_spd(lam) - log_det_spd(g.cov()));
  return std::max(Scalar(0), v);
}

/// Wasserstein gradient of G at g: ∇V + α ∇log ρ, i.e.
/// x ↦ Λ(x - μ*) - α Σ⁻¹(x - m).
template <typename Scalar>
AffineMap<Scalar> subgradient_field(const GaussianMeasure<Scalar>& g, const ObjectiveSpec<Scalar>& spec) {
  require(spec.dim() == g.dim(), "subgradient_field: dimension mismatch");
  const auto& lam = spec.potential.lambda_mat;
  AffineMap<Scalar> f{lam, -lam * spec.potential.center};
  if (spec.has_entropy()) {
    require(g.is_nondegenerate(), "subgradient_field: degenerate Gaussian");
    Eigen::LLT<Mat<Scalar>> llt(g.cov());
    const Mat<Scalar> prec = llt.solve(Mat<Scalar>::Identity(g.dim(), g.dim()));
    f.linear -= spec.alpha * symmetrized(prec);
    f.offset += spec.alpha * (prec * g.mean());
  }
  return f;
}

/// E_g[ f1(x)ᵀ f2(x) ] for affine fields.
template <typename Scalar>
Scalar field_inner(const AffineMap<Scalar>& f1, const AffineMap<Scalar>& f2, const GaussianMeasure<Scalar>& g) {
  require(f1.dim() == g.dim() && f2.dim() == g.dim(), "field_inner: dimension mismatch");
  const Vec<Scalar> a = f1(g.mean());
  const Vec<Scalar> b = f2(g.mean());
  return a.dot(b) + (f1.linear * g.cov() * f2.linear.transpose()).trace();
}

/// ‖f‖_{L²(g)} = sqrt(‖J m + c‖² + tr(J Σ Jᵀ)).
template <typename Scalar>
Scalar field_l2_norm(const AffineMap<Scalar>& f, const GaussianMeasure<Scalar>& g) {
  return std::sqrt(std::max(Scalar(0), field_inner(f, f, g)));
}

}  // namespace jkolab

#endif  // JKOLAB_GAUSSIAN_HPP
