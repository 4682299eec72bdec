#ifndef JKOLAB_JKO_HPP
#define JKOLAB_JKO_HPP

// One W2-proximal (JKO) step
//   p_{n+1} = argmin_ρ  G(ρ) + W2²(p_n, ρ) / 2γ
// solved exactly in the Gaussian and quantile-grid families, the first-order
// residual ξ_{n+1} measured at the result, and transport-level perturbations
// that set ‖ξ_{n+1}‖ to a requested ε.

#include "jkolab/jkolab.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>

namespace jkolab {

template <typename Measure, typename Transport>
struct StepResult {
  Measure next_measure;
  Transport transport;  // the map actually applied to p_n
  double xi_norm = 0;
  int solver_iterations = 0;
  double objective_value = 0;  // F_{n+1}(next_measure)
};

using GaussianStep = StepResult<Gaussian, Affine>;
using GridStep = StepResult<Grid, Map1D>;

struct GaussianSolverOptions {
  double tol = 1e-9;  // on ‖ξ‖
  int max_iterations = 10000;
  double damping = 0.5;
};

struct GridSolverOptions {
  double tol = 1e-6;  // on max_k |ξ_k|
  int max_iterations = 200;
};

GaussianStep jko_step_gaussian(const Gaussian& p_n, const Objective& spec, double gamma,
                               const GaussianSolverOptions& opts = {});

/// Damped Newton on
///   Φ(Q) = (1/M) Σ_k [V(Q_k) + (Q_k - Q_n,k)²/2γ] - (α/M) Σ_{k<M} log(M (Q_{k+1} - Q_k)).
/// The Hessian is tridiagonal; a fraction-to-boundary rule keeps every gap
/// above 1% of its previous value.
GridStep jko_step_grid(const Grid& p_n, const Objective& spec, double gamma,
                       const GridSolverOptions& opts = {});

/// F_{n+1}(ρ) = G(ρ) + W2²(p_n, ρ)/2γ.
double proximal_objective(const Objective& spec, const Gaussian& p_n, const Gaussian& rho, double gamma);
double proximal_objective(const Objective& spec, const Grid& p_n, const Grid& rho, double gamma);

struct GaussianXi {
  Affine field;
  double norm = 0;
};

struct GridXi {
  VectorXd field;  // sampled at the points of p_next
  double norm = 0;
};

/// ξ = ∇V + α∇log p_next - (T_{next→n} - Id)/γ with T_{next→n} the OT map
/// from p_next to p_n.
GaussianXi measure_xi(const Gaussian& p_n, const Gaussian& p_next, const Objective& spec, double gamma);
GridXi measure_xi(const Grid& p_n, const Grid& p_next, const Objective& spec, double gamma);

enum class PerturbMode { kMeanShift, kDilation, kGridBump };

std::string_view to_string(PerturbMode m);
PerturbMode perturb_mode_from_string(std::string_view s);

struct PerturbConfig {
  PerturbMode mode = PerturbMode::kMeanShift;
  /// Shift direction for kMeanShift; first coordinate axis when empty.
  std::optional<VectorXd> direction;
  /// Bump half-width for kGridBump, in standard deviations of p_n.
  double bump_width_sds = 1.5;
  /// Relative tolerance of the amplitude search on ‖ξ‖.
  double rel_tol = 1e-6;
};

/// Smallest segment slope a kGridBump perturbation may leave behind.
inline constexpr double kMinPerturbedSlope = 1e-3;

/// Composes the exact transport with a perturbation of amplitude a, chosen by
/// bisection so that the measured ‖ξ‖ equals eps. eps = 0 returns the exact
/// step unchanged.
GaussianStep perturb_step(const Gaussian& p_n, const GaussianStep& exact, const Objective& spec,
                          double gamma, double eps, const PerturbConfig& cfg = {});
GridStep perturb_step(const Grid& p_n, const GridStep& exact, const Objective& spec, double gamma,
                      double eps, const PerturbConfig& cfg = {});

namespace detail {
/// Finds a in (0, a_max] with f(a) = target (to rel_tol) by doubling from
/// a_start, then bisection. f must be continuous with f(0) < target.
template <typename F>
double calibrate_amplitude(const F& f, double target, double a_start, double a_max, double rel_tol) {
  double lo = 0, hi = std::min(a_start, a_max);
  double f_hi = f(hi);
  while (f_hi < target) {
    if (hi >= a_max)
      throw CalibrationError("perturbation cannot reach the requested residual within the amplitude cap");
    lo = hi;
    hi = std::min(2 * hi, a_max);
    f_hi = f(hi);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(v - target) <= rel_tol * target) return mid;
    (v < target ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * hi) break;
  }
  return 0.5 * (lo + hi);
}
}  // namespace detail

/// Smooth compactly supported bump, 1 at z = 0, 0 for |z| >= 1.
double bump(double z);

}  // namespace jkolab

#endif  // JKOLAB_JKO_HPP
