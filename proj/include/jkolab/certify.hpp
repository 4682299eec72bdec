#ifndef JKOLAB_CERTIFY_HPP
#define JKOLAB_CERTIFY_HPP

// Executable forms of the convergence inequalities. Every report measures its
// lhs from run data and compares it against the closed-form rhs.

#include "jkolab/process.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace jkolab {

struct BoundReport {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  double slack = 0;  // rhs - lhs
  bool holds = false;
  double tol = 0;
  std::vector<std::pair<std::string, std::string>> context;
};

/// Fills slack and holds (slack >= -tol); non-finite sides never hold.
BoundReport make_report(std::string name, double lhs, double rhs, double tol,
                        std::vector<std::pair<std::string, std::string>> context = {});

inline constexpr double kGaussianTol = 1e-8;
inline constexpr double kGridTol = 1e-3;
inline constexpr double kGaussianDpiTol = 1e-10;
inline constexpr double kGridDpiTol = 1e-4;

inline double family_tol(const Gaussian&) { return kGaussianTol; }
inline double family_tol(const Grid&) { return kGridTol; }

/// G(π) - G(ρ) >= ⟨η∘T_p^ρ, T_p^π - T_p^ρ⟩_p + (λ/2) W2²(π, ρ) with η the
/// subgradient field at ρ. lhs is the right-hand expression, rhs = G(π) - G(ρ).
BoundReport check_monotonicity(const Gaussian& p, const Gaussian& rho, const Gaussian& pi, const Objective& spec,
                               double tol = kGaussianTol);
BoundReport check_monotonicity(const Grid& p, const Grid& rho, const Grid& pi, const Objective& spec,
                               double tol = kGridTol);

/// One EVI report per step:
/// (1 + γλ/2) W2²(p_{n+1}, π) + 2γ (G(p_{n+1}) - G(π)) <= W2²(p_n, π) + (2γ/λ) ε².
std::vector<BoundReport> check_evi(const GaussianTrajectory& traj, const Gaussian& pi, double eps_used);
std::vector<BoundReport> check_evi(const GridTrajectory& traj, const Grid& pi, double eps_used);

/// Rate report per n, W2²(p_n, q) <= (1 + γλ/2)^{-n} W2²(p_0, q) + 4ε²/λ², plus
/// the two terminal reports at n = N.
std::vector<BoundReport> check_forward_rate(const GaussianTrajectory& traj);
std::vector<BoundReport> check_forward_rate(const GridTrajectory& traj);

/// KL(p_0 ‖ q_0) and TV(p_0, q_0) against (9/2γ)(ε/λ)² and (3/(2√γ))(ε/λ).
std::vector<BoundReport> check_kl_tv_guarantee(const GaussianTrajectory& traj, const GaussianReverse& exact);
std::vector<BoundReport> check_kl_tv_guarantee(const GridTrajectory& traj, const GridReverse& exact);

/// Proposition bound (ε_inv/γK) e^{γK(N+1)} and mixed bound
/// (e^{2γK}/γK) (W2(p_0,q) λ)^{8K/λ} ε_inv / ε^{8K/λ} on W2(q̃_0, q_0).
std::vector<BoundReport> check_inversion_bound(const GaussianTrajectory& traj, const GaussianReverse& exact,
                                               const GaussianReverse& perturbed);
std::vector<BoundReport> check_inversion_bound(const GridTrajectory& traj, const GridReverse& exact,
                                               const GridReverse& perturbed);

/// |KL(p‖q) - KL(T#p‖T#q)| <= family tolerance.
BoundReport check_dpi(const Gaussian& p, const Gaussian& q, const Affine& t);
BoundReport check_dpi(const Grid& p, const Grid& q, const Map1D& t);
/// Chain form on a run: |KL(p_0‖q_0) - KL(p_N‖q)|.
BoundReport check_dpi(const GaussianTrajectory& traj, const GaussianReverse& exact);
BoundReport check_dpi(const GridTrajectory& traj, const GridReverse& exact);

/// W2²(ρ_δ, P) <= δ² M₂(P) + 2δd.
BoundReport check_smoothing(const AtomicMeasure& p, double delta);

/// G(p_{n+1}) + W2²(p_n, p_{n+1})/2γ <= G(p_n) for steps whose residual is at
/// solver tolerance.
std::vector<BoundReport> check_descent(const GaussianTrajectory& traj);
std::vector<BoundReport> check_descent(const GridTrajectory& traj);

/// Check families understood by certify_run.
const std::vector<std::string>& check_names();

struct SmoothingInput {
  AtomicMeasure atoms;
  double delta;
};

/// Runs the named check families over one run's data. Families whose inputs
/// are absent (no perturbed reverse, no atoms, no entropy) are skipped.
std::vector<BoundReport> certify_run(const GaussianTrajectory& traj, const GaussianReverse& exact,
                                     const std::optional<GaussianReverse>& perturbed,
                                     const std::optional<SmoothingInput>& smoothing,
                                     const std::vector<std::string>& checks);
std::vector<BoundReport> certify_run(const GridTrajectory& traj, const GridReverse& exact,
                                     const std::optional<GridReverse>& perturbed,
                                     const std::optional<SmoothingInput>& smoothing,
                                     const std::vector<std::string>& checks);

/// Family part of a report name ("forward_rate.rate" → "forward_rate").
std::string check_family(const std::string& report_name);

}  // namespace jkolab

#endif  // JKOLAB_CERTIFY_HPP
