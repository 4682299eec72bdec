#ifndef JKOLAB_PROCESS_HPP
#define JKOLAB_PROCESS_HPP

// Forward JKO process p_0 → p_N, exact and perturbed reverse processes
// q_N = q → q_0, OU smoothing of atomic data and the Lipschitz constant K.

#include "jkolab/jko.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace jkolab {

enum class Family { kGaussian, kGrid };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

template <typename Measure, typename Transport>
struct Trajectory {
  Objective spec;
  double gamma = 1;
  std::vector<Measure> measures;      // p_0 .. p_N
  std::vector<Transport> transports;  // T_1 .. T_N; transports[n] maps p_n to p_{n+1}
  std::vector<double> xi_norms;       // ‖ξ_1‖ .. ‖ξ_N‖
  std::vector<int> solver_iterations;

  int steps() const { return static_cast<int>(transports.size()); }
};

using GaussianTrajectory = Trajectory<Gaussian, Affine>;
using GridTrajectory = Trajectory<Grid, Map1D>;

/// Indexed by n: measures[n] = q_n (or q̃_n) for n = 0..N, transports[n]
/// maps q_{n+1} to q_n and residuals[n] = ‖T_{n+1}∘S_{n+1} - Id‖ on q_{n+1}.
template <typename Measure, typename Transport>
struct ReverseRun {
  std::vector<Measure> measures;
  std::vector<Transport> transports;
  std::vector<double> residuals;
  bool perturbed = false;
  double eps_inv = 0;
};

using GaussianReverse = ReverseRun<Gaussian, Affine>;
using GridReverse = ReverseRun<Grid, Map1D>;

struct AtomicMeasure {
  std::vector<VectorXd> atoms;
  std::vector<double> weights;

  /// Validates positivity, normalization to 1e-12 and a common dimension.
  AtomicMeasure(std::vector<VectorXd> atoms, std::vector<double> weights);
  static AtomicMeasure uniform(std::vector<VectorXd> atoms);

  Eigen::Index dim() const { return atoms.front().size(); }
  std::size_t size() const { return atoms.size(); }
  double second_moment() const;
};

/// N = max(1, ⌈(8/(γλ)) (log W2(p_0, q) + log(λ/ε))⌉).
int steps_needed(double w2_p0_q, double lambda, double gamma, double eps);

/// With cfg.direction unset, seed 0 shifts along the first axis and any other
/// seed draws a fresh random unit direction (sign in 1-D) for every step.
GaussianTrajectory run_forward(const Gaussian& p0, const Objective& spec, double gamma, int n_steps,
                               const std::vector<double>& eps_schedule, const PerturbConfig& cfg = {},
                               std::uint64_t seed = 0, const GaussianSolverOptions& opts = {});
GridTrajectory run_forward(const Grid& p0, const Objective& spec, double gamma, int n_steps,
                           const std::vector<double>& eps_schedule, const PerturbConfig& cfg = {},
                           std::uint64_t seed = 0, const GridSolverOptions& opts = {});

/// q_N = global minimizer (rendered on p_0's grid size for the grid family),
/// then q_{n-1} = T_n⁻¹ # q_n.
GaussianReverse run_reverse_exact(const GaussianTrajectory& traj);
GridReverse run_reverse_exact(const GridTrajectory& traj);

/// S_n perturbs T_n⁻¹ so that ‖T_n∘S_n - Id‖ on q̃_n equals eps_inv; built
/// from n = N down to 1 so q̃_n exists when S_n is calibrated.
GaussianReverse run_reverse_perturbed(const GaussianTrajectory& traj, double eps_inv,
                                      const PerturbConfig& cfg = {}, std::uint64_t seed = 0);
GridReverse run_reverse_perturbed(const GridTrajectory& traj, double eps_inv, const PerturbConfig& cfg = {},
                                  std::uint64_t seed = 0);

/// OU marginal at time δ: Σ w_i N(e^{-δ} x_i, (1 - e^{-2δ}) I).
Grid ou_smooth_grid(const AtomicMeasure& p, double delta, Eigen::Index m);
Gaussian ou_smooth_gaussian(const AtomicMeasure& p, double delta);  // single atom
std::variant<Grid, Gaussian> ou_smooth(const AtomicMeasure& p, double delta, Eigen::Index m);

/// Exact W2²(ρ_δ, P): closed form for a single atom; for 1-D atoms, the
/// quantile integral split at the atoms' cumulative weights and evaluated
/// with truncated normal moments.
double ou_w2_squared(const AtomicMeasure& p, double delta);

/// Lipschitz constant of T⁻¹.
double inverse_lipschitz(const Affine& t);
double inverse_lipschitz(const Map1D& t);

/// K = max(0, max_n log Lip(T_n⁻¹) / γ).
template <typename Measure, typename Transport>
double estimate_K(const Trajectory<Measure, Transport>& traj) {
  require(!traj.transports.empty(), "estimate_K: empty trajectory");
  double k = 0;
  for (const auto& t : traj.transports) k = std::max(k, std::log(inverse_lipschitz(t)) / traj.gamma);
  return k;
}

/// q for the trajectory's family: the global minimizer, as a grid of p_0's size.
Gaussian target_measure(const GaussianTrajectory& traj);
Grid target_measure(const GridTrajectory& traj);

}  // namespace jkolab

#endif  // JKOLAB_PROCESS_HPP
