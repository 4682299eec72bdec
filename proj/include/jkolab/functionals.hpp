#ifndef JKOLAB_FUNCTIONALS_HPP
#define JKOLAB_FUNCTIONALS_HPP

#include "jkolab/gaussian.hpp"
#include "jkolab/objective.hpp"
#include "jkolab/quantile1d.hpp"

#include <algorithm>
#include <cmath>

namespace jkolab {

template <typename Scalar>
Scalar lambda_of(const ObjectiveSpec<Scalar>& spec) {
  return min_eigenvalue(spec.potential.lambda_mat);
}

template <typename Scalar>
struct Rescaled {
  ObjectiveSpec<Scalar> spec;
  Scalar scale = 1;
};

/// x ↦ V(a x) is (a² λ)-convex; picks a = min(1, 1/sqrt(λ_min)) so the
/// rescaled objective has λ ≤ 1. Λ' = a²Λ, μ*' = μ*/a.
template <typename Scalar>
Rescaled<Scalar> rescale_to_unit_lambda(const ObjectiveSpec<Scalar>& spec) {
  const Scalar lam = lambda_of(spec);
  require(lam > Scalar(0), "rescale_to_unit_lambda: lambda must be positive");
  const Scalar a = std::min(Scalar(1), Scalar(1) / std::sqrt(lam));
  if (a == Scalar(1)) return {spec, Scalar(1)};
  ObjectiveSpec<Scalar> out = make_objective<Scalar>(Mat<Scalar>(a * a * spec.potential.lambda_mat),
                                                     Vec<Scalar>(spec.potential.center / a),
                                                     spec.variant, spec.alpha);
  return {out, a};
}

/// G = α H + E[V] + log Z on a Gaussian. Entropy-bearing variants require a
/// nondegenerate measure (H = +∞ otherwise).
template <typename Scalar>
Scalar evaluate(const ObjectiveSpec<Scalar>& spec, const GaussianMeasure<Scalar>& g) {
  const Scalar e = potential_energy(g, spec.potential) + spec.potential.log_z;
  if (!spec.has_entropy()) return e;
  require(g.is_nondegenerate(), "evaluate: entropy-bearing objective at a degenerate measure");
  return spec.alpha * entropy(g) + e;
}

template <typename Scalar>
Scalar evaluate(const ObjectiveSpec<Scalar>& spec, const QuantileGrid<Scalar>& p) {
  const Scalar e = potential_energy(p, spec.potential) + spec.potential.log_z;
  if (!spec.has_entropy()) return e;
  return spec.alpha * entropy(p) + e;
}

/// N(μ*, α Λ⁻¹); for the potential-only objective the point mass at μ*.
template <typename Scalar>
GaussianMeasure<Scalar> global_minimizer(const ObjectiveSpec<Scalar>& spec) {
  const auto d = spec.dim();
  if (!spec.has_entropy()) return GaussianMeasure<Scalar>::point_mass(spec.potential.center);
  Eigen::LLT<Mat<Scalar>> llt(spec.potential.lambda_mat);
  Mat<Scalar> cov = spec.alpha * llt.solve(Mat<Scalar>::Identity(d, d));
  return GaussianMeasure<Scalar>(spec.potential.center, symmetrized(cov));
}

/// Global minimizer rendered on an M-point quantile grid (1-D, α > 0).
template <typename Scalar>
QuantileGrid<Scalar> global_minimizer_grid(const ObjectiveSpec<Scalar>& spec, Eigen::Index m) {
  require(spec.dim() == 1, "global_minimizer_grid: 1-D objective required");
  require(spec.has_entropy(), "global_minimizer_grid: minimizer is a point mass");
  const auto q = global_minimizer(spec);
  return from_gaussian(q.mean()(0), std::sqrt(q.cov()(0, 0)), m);
}

/// Wasserstein gradient ∇V + α ∇log ρ sampled at the grid points.
template <typename Scalar>
Vec<Scalar> subgradient_field(const QuantileGrid<Scalar>& p, const ObjectiveSpec<Scalar>& spec) {
  require(spec.dim() == 1, "subgradient_field: grid family needs a 1-D objective");
  Vec<Scalar> f = p.values().unaryExpr([&](Scalar x) { return spec.potential.gradient_1d(x); });
  if (spec.has_entropy()) f += spec.alpha * score(p);
  return f;
}

/// RMS of a field sampled on the grid: ‖f‖_{L²(p)}.
template <typename Scalar>
Scalar field_l2_norm(const Vec<Scalar>& field) {
  return std::sqrt(field.squaredNorm() / static_cast<Scalar>(field.size()));
}

}  // namespace jkolab

#endif  // JKOLAB_FUNCTIONALS_HPP
