#ifndef JKOLAB_ORACLES_HPP
#define JKOLAB_ORACLES_HPP

// Slow reference computations for tests. Nothing here calls the proximal-step
// solvers; objectives are re-derived from measure parameters directly.

#include "jkolab/jkolab.hpp"

#include <cstdint>
#include <vector>

namespace jkolab::oracles {

struct OracleConfig {
  long budget = 200000;  // objective/gradient evaluations across all restarts
  int restarts = 10;
  int samples = 20000;
  std::uint64_t seed = 1;
};

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Measure>
struct OracleResult {
  Measure measure;
  double objective = 0;
  long evaluations = 0;
};

/// G(ρ) + W2²(p_n, ρ)/2γ on the grid with the forward-difference entropy
/// -(α/M) Σ_{k<M-1} log(M (Q_{k+1} - Q_k)); +∞ off the monotone cone.
double grid_proximal_objective(const Grid& p_n, const VectorXd& q, const Objective& spec, double gamma);

/// Same functional on Gaussians, from parameters.
double gaussian_proximal_objective(const Gaussian& p_n, const Gaussian& rho, const Objective& spec, double gamma);

/// Accelerated projected gradient on quantile values (isotonic repair plus
/// jitter restores strict monotonicity), best of cfg.restarts starts.
OracleResult<Grid> brute_jko(const Grid& p_n, const Objective& spec, double gamma, const OracleConfig& cfg = {});

/// Nelder-Mead over (mean, Cholesky factor with log diagonal), restarted from
/// the incumbent until no improvement.
OracleResult<Gaussian> brute_jko(const Gaussian& p_n, const Objective& spec, double gamma,
                                 const OracleConfig& cfg = {});

/// Sorted independent inverse-CDF samples of both measures, paired in order.
double empirical_w2_1d(const Grid& p, const Grid& q, int n_samples, std::uint64_t seed);

/// Exact W2 between two equal-size uniform point clouds by the Hungarian
/// method; at most 2000 points.
double assignment_w2(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b);

/// KL(p ‖ q) with q ∝ exp(-V), integrating the piecewise-constant density of
/// p on 16 sub-points per knot interval.
double quadrature_kl(const Grid& p, const Objective& spec);
/// 1-D Gaussian against the target by Simpson's rule.
double quadrature_kl(const Gaussian& p, const Objective& spec);

/// Central difference (G((Id + t v)#ρ) - G((Id - t v)#ρ)) / 2t.
double fd_directional(const Objective& spec, const Gaussian& rho, const Affine& v, double t);
/// Grid form; v holds the field at the knots of ρ.
double fd_directional(const Objective& spec, const Grid& rho, const VectorXd& v, double t);
/// Central differences of the proximal objective G(ρ) + W2²(p_n, ρ)/2γ along
/// the same curves.
double fd_directional(const Objective& spec, const Gaussian& p_n, double gamma, const Gaussian& rho, const Affine& v,
                      double t);
double fd_directional(const Objective& spec, const Grid& p_n, double gamma, const Grid& rho, const VectorXd& v,
                      double t);

/// G from parameters (Gaussian) or with the forward-difference entropy (grid).
double objective_value(const Objective& spec, const Gaussian& rho);
double objective_value(const Objective& spec, const VectorXd& q);

}  // namespace jkolab::oracles

#endif  // JKOLAB_ORACLES_HPP
