#ifndef JKOLAB_OBJECTIVE_HPP
#define JKOLAB_OBJECTIVE_HPP

#include "jkolab/linalg.hpp"
#include "jkolab/types.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace jkolab {

/// Which functional G is minimized.
///   kKL            G = H + E           (KL divergence to q ∝ exp(-V))
///   kPotentialOnly G = E               (lambda-convex, minimizer is a point mass)
///   kWeighted      G = alpha H + E     (alpha >= 0)
/// Every variant carries the additive constant log Z so that kKL is zero at q.
enum class Variant { kKL, kPotentialOnly, kWeighted };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kKL: return "KL";
    case Variant::kPotentialOnly: return "POTENTIAL_ONLY";
    case Variant::kWeighted: return "WEIGHTED";
  }
  return "?";
}

inline Variant variant_from_string(std::string_view s) {
  if (s == "KL") return Variant::kKL;
  if (s == "POTENTIAL_ONLY") return Variant::kPotentialOnly;
  if (s == "WEIGHTED") return Variant::kWeighted;
  throw PreconditionError("unknown objective variant: " + std::string(s));
}

/// V(x) = ½ (x - center)ᵀ Λ (x - center); log_z = log ∫ exp(-V).
template <typename Scalar>
struct QuadraticPotential {
  Mat<Scalar> lambda_mat;
  Vec<Scalar> center;
  Scalar log_z{};

  Eigen::Index dim() const { return center.size(); }

  Scalar operator()(const Vec<Scalar>& x) const {
    const Vec<Scalar> r = x - center;
    return Scalar(0.5) * r.dot(lambda_mat * r);
  }
  Vec<Scalar> gradient(const Vec<Scalar>& x) const { return lambda_mat * (x - center); }

  // Scalar form for the 1-D grid family.
  Scalar value_1d(Scalar x) const {
    const Scalar r = x - center(0);
    return Scalar(0.5) * lambda_mat(0, 0) * r * r;
  }
  Scalar gradient_1d(Scalar x) const { return lambda_mat(0, 0) * (x - center(0)); }
};

template <typename Scalar>
struct ObjectiveSpec {
  QuadraticPotential<Scalar> potential;
  Variant variant = Variant::kKL;
  Scalar alpha = 1;   // entropy weight: 1 for kKL, 0 for kPotentialOnly
  Scalar lambda = 1;  // smallest eigenvalue of Λ

  Eigen::Index dim() const { return potential.dim(); }
  bool has_entropy() const { return alpha > Scalar(0); }
};

template <typename Scalar>
Scalar log_normalizer(const Mat<Scalar>& lambda_mat) {
  const auto d = static_cast<Scalar>(lambda_mat.rows());
  return Scalar(0.5) * d * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) -
         Scalar(0.5) * log_det_spd(lambda_mat);
}

/// Validates Λ (symmetric, SPD) and fills log_z and lambda.
template <typename Scalar>
ObjectiveSpec<Scalar> make_objective(const Mat<Scalar>& lambda_mat, const Vec<Scalar>& center,
                                     Variant variant = Variant::kKL, Scalar alpha = 1) {
  require(lambda_mat.rows() == lambda_mat.cols() && lambda_mat.rows() == center.size() &&
              center.size() > 0,
          "make_objective: dimension mismatch");
  require(is_symmetric(lambda_mat), "make_objective: lambda_mat is not symmetric");
  require(center.allFinite() && lambda_mat.allFinite(), "make_objective: non-finite entries");
  ObjectiveSpec<Scalar> spec;
  spec.potential.lambda_mat = symmetrized(lambda_mat);
  spec.potential.center = center;
  spec.lambda = min_eigenvalue(spec.potential.lambda_mat);
  require(spec.lambda > Scalar(0), "make_objective: lambda_mat must be positive definite");
  spec.potential.log_z = log_normalizer(spec.potential.lambda_mat);
  spec.variant = variant;
  switch (variant) {
    case Variant::kKL: spec.alpha = 1; break;
    case Variant::kPotentialOnly: spec.alpha = 0; break;
    case Variant::kWeighted:
      require(alpha >= Scalar(0) && std::isfinite(static_cast<double>(alpha)),
              "make_objective: WEIGHTED requires alpha >= 0");
      spec.alpha = alpha;
      break;
  }
  return spec;
}

/// Standard normal target in d dimensions: Λ = I, center 0.
template <typename Scalar = double>
ObjectiveSpec<Scalar> standard_normal_objective(Eigen::Index d) {
  return make_objective<Scalar>(Mat<Scalar>::Identity(d, d), Vec<Scalar>::Zero(d));
}

}  // namespace jkolab

#endif  // JKOLAB_OBJECTIVE_HPP
