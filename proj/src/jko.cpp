#include "jkolab/jko.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace jkolab {

namespace {

void require_step_size(double gamma) {
  require(gamma > 0 && gamma < 2, "jko step: gamma must lie in (0, 2)");
}

// Residual of the covariance stationarity equation at Σ (mean already exact):
// ξ(x) = J (x - m) with J = Λ - αΣ⁻¹ + (I - A(Σ))/γ.
struct CovResidual {
  MatrixXd precision_target;  // (Λ + (I - A)/γ) / α
  double norm;
};

CovResidual cov_residual(const MatrixXd& cov, const MatrixXd& precision, const MatrixXd& cov_n,
                         const Objective& spec, double gamma) {
  const auto d = cov.rows();
  const MatrixXd a = bw_transport_matrix(cov, cov_n);
  const MatrixXd target =
      spec.potential.lambda_mat + (MatrixXd::Identity(d, d) - a) / gamma;
  const MatrixXd j = target - spec.alpha * precision;
  const double r = std::sqrt(std::max(0.0, (j * cov * j.transpose()).trace()));
  return {symmetrized(MatrixXd(target / spec.alpha)), r};
}

}  // namespace

double proximal_objective(const Objective& spec, const Gaussian& p_n, const Gaussian& rho, double gamma) {
  return evaluate(spec, rho) + w2_bw_squared(p_n, rho) / (2 * gamma);
}

double proximal_objective(const Objective& spec, const Grid& p_n, const Grid& rho, double gamma) {
  const double w = w2(p_n, rho);
  return evaluate(spec, rho) + w * w / (2 * gamma);
}

GaussianStep jko_step_gaussian(const Gaussian& p_n, const Objective& spec, double gamma,
                               const GaussianSolverOptions& opts) {
  require_step_size(gamma);
  require(spec.dim() == p_n.dim(), "jko_step_gaussian: dimension mismatch");
  require(p_n.is_nondegenerate(), "jko_step_gaussian: p_n must be nondegenerate");
  const auto d = p_n.dim();
  const MatrixXd& lam = spec.potential.lambda_mat;
  const MatrixXd eye = MatrixXd::Identity(d, d);
  const MatrixXd shift = eye + gamma * lam;

  // Mean stationarity: Λ(m - μ*) + (m - m_n)/γ = 0.
  const VectorXd mean = shift.lu().solve(p_n.mean() + gamma * lam * spec.potential.center);

  MatrixXd cov;
  int iterations = 0;
  if (!spec.has_entropy()) {
    // Λ + (I - A)/γ = 0 gives A = I + γΛ, so the forward map is (I + γΛ)⁻¹.
    const MatrixXd b = symmetrized(MatrixXd(shift.inverse()));
    cov = symmetrized(MatrixXd(b * p_n.cov() * b));
  } else {
    // Damped fixed point in precision space: P ← (1-β) P + β (Λ + (I - A(P⁻¹))/γ)/α.
    double beta = opts.damping;
    cov = p_n.cov();
    MatrixXd prec = symmetrized(MatrixXd(cov.llt().solve(eye)));
    CovResidual res = cov_residual(cov, prec, p_n.cov(), spec, gamma);
    while (res.norm > opts.tol) {
      if (iterations >= opts.max_iterations)
        throw SolverError("jko_step_gaussian: no convergence after " + std::to_string(iterations) +
                          " iterations (|xi| = " + std::to_string(res.norm) +
                          "); reduce gamma or increase damping");
      ++iterations;
      const MatrixXd cand_prec = symmetrized(MatrixXd((1 - beta) * prec + beta * res.precision_target));
      Eigen::LLT<MatrixXd> llt(cand_prec);
      bool accepted = false;
      if (llt.info() == Eigen::Success && min_eigenvalue(cand_prec) > 0) {
        const MatrixXd cand_cov = symmetrized(MatrixXd(llt.solve(eye)));
        CovResidual cand_res = cov_residual(cand_cov, cand_prec, p_n.cov(), spec, gamma);
        if (std::isfinite(cand_res.norm) && cand_res.norm < res.norm) {
          prec = cand_prec;
          cov = cand_cov;
          res = std::move(cand_res);
          accepted = true;
        }
      }
      if (!accepted) {
        beta *= 0.5;  // oscillation or loss of definiteness
        if (beta < 1e-12)
          throw SolverError("jko_step_gaussian: damping underflow; reduce gamma");
      }
    }
  }

  Gaussian target(mean, cov);
  GaussianStep out;
  out.transport = ot_map_bw(p_n, target);
  out.next_measure = pushforward(p_n, out.transport);
  out.xi_norm = measure_xi(p_n, out.next_measure, spec, gamma).norm;
  out.solver_iterations = iterations;
  out.objective_value = proximal_objective(spec, p_n, out.next_measure, gamma);
  return out;
}

namespace {

struct GridProblem {
  const VectorXd& q_n;
  double lam, center, alpha, gamma;

  // M·Φ up to additive constants.
  double value(const VectorXd& q) const {
    double s = 0;
    const auto m = q.size();
    for (Eigen::Index k = 0; k < m; ++k) {
      const double r = q(k) - center, t = q(k) - q_n(k);
      s += 0.5 * lam * r * r + t * t / (2 * gamma);
    }
    if (alpha > 0) {
      for (Eigen::Index k = 0; k + 1 < m; ++k) s -= alpha * std::log(q(k + 1) - q(k));
    }
    return s;
  }

  // M·∇Φ, which is the discrete ξ field.
  VectorXd gradient(const VectorXd& q) const {
    const auto m = q.size();
    VectorXd g(m);
    for (Eigen::Index k = 0; k < m; ++k) g(k) = lam * (q(k) - center) + (q(k) - q_n(k)) / gamma;
    if (alpha > 0) {
      for (Eigen::Index k = 0; k + 1 < m; ++k) {
        const double inv = alpha / (q(k + 1) - q(k));
        g(k) += inv;
        g(k + 1) -= inv;
      }
    }
    return g;
  }

  // Solves H d = rhs for the tridiagonal Hessian of M·Φ (Thomas algorithm;
  // H is strictly diagonally dominant).
  VectorXd newton_direction(const VectorXd& q, const VectorXd& rhs) const {
    const auto m = q.size();
    VectorXd diag = VectorXd::Constant(m, lam + 1 / gamma);
    VectorXd off = VectorXd::Zero(m - 1);  // H(k, k+1)
    if (alpha > 0) {
      for (Eigen::Index k = 0; k + 1 < m; ++k) {
        const double gap = q(k + 1) - q(k);
        const double w = alpha / (gap * gap);
        diag(k) += w;
        diag(k + 1) += w;
        off(k) = -w;
      }
    }
    VectorXd c(m - 1), x(m);
    VectorXd dd = rhs;
    double denom = diag(0);
    if (m > 1) c(0) = off(0) / denom;
    dd(0) /= denom;
    for (Eigen::Index k = 1; k < m; ++k) {
      denom = diag(k) - off(k - 1) * c(k - 1);
      if (k + 1 < m) c(k) = off(k) / denom;
      dd(k) = (dd(k) - off(k - 1) * dd(k - 1)) / denom;
    }
    x(m - 1) = dd(m - 1);
    for (Eigen::Index k = m - 2; k >= 0; --k) x(k) = dd(k) - c(k) * x(k + 1);
    return x;
  }
};

}  // namespace

GridStep jko_step_grid(const Grid& p_n, const Objective& spec, double gamma, const GridSolverOptions& opts) {
  require_step_size(gamma);
  require(spec.dim() == 1, "jko_step_grid: 1-D objective required");
  require(spec.has_entropy(), "jko_step_grid: grid family needs an entropy-bearing objective");
  const GridProblem prob{p_n.values(), spec.potential.lambda_mat(0, 0), spec.potential.center(0),
                         spec.alpha, gamma};
  VectorXd q = p_n.values();
  const auto m = q.size();
  int it = 0;
  for (;; ++it) {
    const VectorXd g = prob.gradient(q);
    if (g.cwiseAbs().maxCoeff() <= opts.tol) break;
    if (it >= opts.max_iterations)
      throw SolverError("jko_step_grid: Newton did not converge in " + std::to_string(it) + " iterations");
    const VectorXd d = prob.newton_direction(q, -g);

    // Fraction to boundary: new gaps stay >= 1% of the old ones.
    double t = 1;
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
      const double dg = d(k + 1) - d(k);
      if (dg < 0) t = std::min(t, 0.99 * (q(k + 1) - q(k)) / -dg);
    }
    const double f0 = prob.value(q);
    const double slope = g.dot(d);
    if (!(slope < 0)) throw SolverError("jko_step_grid: Newton direction is not a descent direction");
    // Below this predicted decrease the objective difference is round-off.
    const bool roundoff = -slope <= 1e-12 * std::max(1.0, std::abs(f0));
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const VectorXd trial = q + t * d;
      const double f1 = prob.value(trial);
      if (std::isfinite(f1) && (f1 <= f0 + 1e-4 * t * slope || roundoff)) {
        q = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) throw SolverError("jko_step_grid: line search failed");
  }

  GridStep out;
  out.next_measure = Grid(q);
  out.transport = ot_map(p_n, out.next_measure);
  out.xi_norm = measure_xi(p_n, out.next_measure, spec, gamma).norm;
  out.solver_iterations = it;
  out.objective_value = proximal_objective(spec, p_n, out.next_measure, gamma);
  return out;
}

GaussianXi measure_xi(const Gaussian& p_n, const Gaussian& p_next, const Objective& spec, double gamma) {
  const Affine back = ot_map_bw(p_next, p_n);
  const auto d = p_n.dim();
  GaussianXi xi;
  xi.field = subgradient_field(p_next, spec) - (back - Affine::identity(d)) * (1 / gamma);
  xi.norm = field_l2_norm(xi.field, p_next);
  return xi;
}

GridXi measure_xi(const Grid& p_n, const Grid& p_next, const Objective& spec, double gamma) {
  // ot_map(p_next, p_n) sends Q_next,k to Q_n,k.
  GridXi xi;
  xi.field = subgradient_field(p_next, spec) - (p_n.values() - p_next.values()) / gamma;
  xi.norm = field_l2_norm(xi.field);
  return xi;
}

std::string_view to_string(PerturbMode m) {
  switch (m) {
    case PerturbMode::kMeanShift: return "MEAN_SHIFT";
    case PerturbMode::kDilation: return "DILATION";
    case PerturbMode::kGridBump: return "GRID_BUMP";
  }
  return "?";
}

PerturbMode perturb_mode_from_string(std::string_view s) {
  if (s == "MEAN_SHIFT") return PerturbMode::kMeanShift;
  if (s == "DILATION") return PerturbMode::kDilation;
  if (s == "GRID_BUMP") return PerturbMode::kGridBump;
  throw PreconditionError("unknown perturbation mode: " + std::string(s));
}

double bump(double z) {
  if (std::abs(z) >= 1) return 0;
  return std::exp(1 - 1 / (1 - z * z));
}

namespace {

VectorXd shift_direction(const PerturbConfig& cfg, Eigen::Index d) {
  VectorXd u = VectorXd::Zero(d);
  if (cfg.direction) {
    require(cfg.direction->size() == d, "perturb: direction has the wrong dimension");
    u = *cfg.direction;
    require(u.norm() > 0, "perturb: zero direction");
    u.normalize();
  } else {
    u(0) = 1;
  }
  return u;
}

}  // namespace

GaussianStep perturb_step(const Gaussian& p_n, const GaussianStep& exact, const Objective& spec,
                          double gamma, double eps, const PerturbConfig& cfg) {
  require(eps >= 0, "perturb_step: eps must be nonnegative");
  if (eps == 0) return exact;
  require(cfg.mode != PerturbMode::kGridBump, "perturb_step: GRID_BUMP is 1-D grid only");
  require(exact.xi_norm < eps, "perturb_step: eps is below the exact step's residual");
  const auto d = p_n.dim();
  const VectorXd u = shift_direction(cfg, d);
  const VectorXd c = exact.next_measure.mean();

  auto build = [&](double a) {
    Affine t = exact.transport;
    if (cfg.mode == PerturbMode::kMeanShift) {
      t.offset += a * u;
    } else {  // x ↦ (1+a)(T(x) - c) + c
      t.linear *= (1 + a);
      t.offset = (1 + a) * (exact.transport.offset - c) + c;
    }
    return t;
  };
  auto residual = [&](double a) {
    return measure_xi(p_n, pushforward(p_n, build(a)), spec, gamma).norm;
  };
  const double a_max = cfg.mode == PerturbMode::kMeanShift ? 1e6 : 1e3;
  const double a = detail::calibrate_amplitude(residual, eps, 1e-3, a_max, cfg.rel_tol);

  GaussianStep out;
  out.transport = build(a);
  out.next_measure = pushforward(p_n, out.transport);
  out.xi_norm = measure_xi(p_n, out.next_measure, spec, gamma).norm;
  out.solver_iterations = exact.solver_iterations;
  out.objective_value = proximal_objective(spec, p_n, out.next_measure, gamma);
  return out;
}

GridStep perturb_step(const Grid& p_n, const GridStep& exact, const Objective& spec, double gamma,
                      double eps, const PerturbConfig& cfg) {
  require(eps >= 0, "perturb_step: eps must be nonnegative");
  if (eps == 0) return exact;
  require(exact.xi_norm < eps, "perturb_step: eps is below the exact step's residual");
  const VectorXd& x = p_n.values();
  const VectorXd& y = exact.next_measure.values();
  const auto m = x.size();
  const double sign = (cfg.direction && (*cfg.direction)(0) < 0) ? -1.0 : 1.0;

  VectorXd phi = VectorXd::Zero(m);
  double a_max = 1e6;
  if (cfg.mode == PerturbMode::kGridBump) {
    const double center = x(m / 2);
    const double width = cfg.bump_width_sds * std::sqrt(variance(p_n));
    for (Eigen::Index k = 0; k < m; ++k) phi(k) = sign * bump((x(k) - center) / width);
    // Keep every segment slope >= kMinPerturbedSlope.
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
      const double dx = x(k + 1) - x(k);
      const double s = (y(k + 1) - y(k)) / dx;
      const double ds = (phi(k + 1) - phi(k)) / dx;
      if (ds < 0) a_max = std::min(a_max, (s - kMinPerturbedSlope) / -ds);
    }
  } else if (cfg.mode == PerturbMode::kDilation) {
    a_max = 1e3;
  }
  const double c = mean(exact.next_measure);

  auto build = [&](double a) -> VectorXd {
    switch (cfg.mode) {
      case PerturbMode::kMeanShift: return (y.array() + sign * a).matrix();
      case PerturbMode::kDilation: return ((1 + a) * (y.array() - c) + c).matrix();
      case PerturbMode::kGridBump: return y + a * phi;
    }
    return y;
  };
  auto residual = [&](double a) { return measure_xi(p_n, Grid(build(a)), spec, gamma).norm; };
  const double a = detail::calibrate_amplitude(residual, eps, std::min(1e-3, a_max), a_max, cfg.rel_tol);

  GridStep out;
  out.next_measure = Grid(build(a));
  out.transport = Map1D(x, out.next_measure.values());
  out.xi_norm = measure_xi(p_n, out.next_measure, spec, gamma).norm;
  out.solver_iterations = exact.solver_iterations;
  out.objective_value = proximal_objective(spec, p_n, out.next_measure, gamma);
  return out;
}

}  // namespace jkolab
