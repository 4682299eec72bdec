#include "jkolab/process.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace jkolab {

std::string_view to_string(Family f) {
  return f == Family::kGaussian ? "gaussian" : "grid";
}

Family family_from_string(std::string_view s) {
  if (s == "gaussian") return Family::kGaussian;
  if (s == "grid") return Family::kGrid;
  throw PreconditionError("unknown family: " + std::string(s));
}

AtomicMeasure::AtomicMeasure(std::vector<VectorXd> a, std::vector<double> w)
    : atoms(std::move(a)), weights(std::move(w)) {
  require(!atoms.empty() && atoms.size() == weights.size(), "AtomicMeasure: need matching non-empty atoms and weights");
  double total = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    require(atoms[i].size() == atoms[0].size() && atoms[i].size() > 0, "AtomicMeasure: inconsistent dimension");
    require(atoms[i].allFinite(), "AtomicMeasure: non-finite atom");
    require(weights[i] > 0, "AtomicMeasure: weights must be positive");
    total += weights[i];
  }
  require(std::abs(total - 1) <= 1e-12, "AtomicMeasure: weights must sum to 1");
}

AtomicMeasure AtomicMeasure::uniform(std::vector<VectorXd> atoms) {
  const std::size_t n = atoms.size();
  require(n > 0, "AtomicMeasure::uniform: no atoms");
  return AtomicMeasure(std::move(atoms), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double AtomicMeasure::second_moment() const {
  double s = 0;
  for (std::size_t i = 0; i < atoms.size(); ++i) s += weights[i] * atoms[i].squaredNorm();
  return s;
}

int steps_needed(double w2_p0_q, double lambda, double gamma, double eps) {
  require(w2_p0_q > 0 && lambda > 0 && gamma > 0 && eps > 0, "steps_needed: arguments must be positive");
  const double n = std::ceil(8.0 / (gamma * lambda) * (std::log(w2_p0_q) + std::log(lambda / eps)));
  return n < 1 ? 1 : static_cast<int>(n);
}

namespace {

std::vector<double> expand_schedule(const std::vector<double>& eps, int n_steps) {
  if (eps.empty()) return std::vector<double>(n_steps, 0.0);
  if (eps.size() == 1) return std::vector<double>(n_steps, eps[0]);
  require(static_cast<int>(eps.size()) == n_steps, "run_forward: eps schedule length must equal N");
  for (double e : eps) require(e >= 0, "run_forward: eps must be nonnegative");
  return eps;
}

template <typename Fn>
auto annotate(int step, Fn&& fn) {
  try {
    return fn();
  } catch (const CalibrationError& e) {
    throw CalibrationError("step " + std::to_string(step) + ": " + e.what());
  } catch (const SolverError& e) {
    throw SolverError("step " + std::to_string(step) + ": " + e.what());
  }
}

class DirectionSource {
 public:
  DirectionSource(const PerturbConfig& cfg, std::uint64_t seed, Eigen::Index d)
      : fixed_(cfg.direction.has_value() || seed == 0), rng_(seed), d_(d) {}

  PerturbConfig next(PerturbConfig cfg) {
    if (fixed_) return cfg;
    std::normal_distribution<double> z;
    VectorXd u(d_);
    do {
      for (Eigen::Index i = 0; i < d_; ++i) u(i) = z(rng_);
    } while (u.norm() < 1e-8);
    cfg.direction = u / u.norm();
    return cfg;
  }

 private:
  bool fixed_;
  std::mt19937_64 rng_;
  Eigen::Index d_;
};

template <typename Measure, typename Transport, typename StepFn>
Trajectory<Measure, Transport> forward_impl(const Measure& p0, const Objective& spec, double gamma, int n_steps,
                                            const std::vector<double>& eps_schedule, const PerturbConfig& cfg,
                                            std::uint64_t seed, Eigen::Index dim, StepFn&& exact_step) {
  require(n_steps >= 0, "run_forward: N must be nonnegative");
  const auto eps = expand_schedule(eps_schedule, n_steps);
  Trajectory<Measure, Transport> traj;
  traj.spec = spec;
  traj.gamma = gamma;
  traj.measures.push_back(p0);
  DirectionSource dirs(cfg, seed, dim);
  for (int n = 0; n < n_steps; ++n) {
    const PerturbConfig step_cfg = dirs.next(cfg);
    auto step = annotate(n + 1, [&] {
      auto exact = exact_step(traj.measures.back());
      if (eps[n] == 0) return exact;
      return perturb_step(traj.measures.back(), exact, spec, gamma, eps[n], step_cfg);
    });
    traj.measures.push_back(std::move(step.next_measure));
    traj.transports.push_back(std::move(step.transport));
    traj.xi_norms.push_back(step.xi_norm);
    traj.solver_iterations.push_back(step.solver_iterations);
  }
  return traj;
}

}  // namespace

GaussianTrajectory run_forward(const Gaussian& p0, const Objective& spec, double gamma, int n_steps,
                               const std::vector<double>& eps_schedule, const PerturbConfig& cfg,
                               std::uint64_t seed, const GaussianSolverOptions& opts) {
  require(p0.is_nondegenerate(), "run_forward: p0 must be nondegenerate");
  return forward_impl<Gaussian, Affine>(p0, spec, gamma, n_steps, eps_schedule, cfg, seed, p0.dim(),
                                        [&](const Gaussian& p) { return jko_step_gaussian(p, spec, gamma, opts); });
}

GridTrajectory run_forward(const Grid& p0, const Objective& spec, double gamma, int n_steps,
                           const std::vector<double>& eps_schedule, const PerturbConfig& cfg,
                           std::uint64_t seed, const GridSolverOptions& opts) {
  return forward_impl<Grid, Map1D>(p0, spec, gamma, n_steps, eps_schedule, cfg, seed, 1,
                                   [&](const Grid& p) { return jko_step_grid(p, spec, gamma, opts); });
}

Gaussian target_measure(const GaussianTrajectory& traj) {
  return global_minimizer(traj.spec);
}

Grid target_measure(const GridTrajectory& traj) {
  require(!traj.measures.empty(), "target_measure: empty trajectory");
  return global_minimizer_grid(traj.spec, traj.measures.front().size());
}

namespace {

double inversion_residual(const Affine& t, const Affine& s, const Gaussian& on) {
  const auto d = t.dim();
  return field_l2_norm(compose(t, s) - Affine::identity(d), on);
}

double inversion_residual(const Map1D& t, const Map1D& s, const Grid& on) {
  const VectorXd& x = on.values();
  double acc = 0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double r = t(s(x(k))) - x(k);
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

template <typename Run, typename Traj, typename Measure>
Run reverse_exact_impl(const Traj& traj, Measure q) {
  const int n_steps = traj.steps();
  Run run;
  run.measures.resize(n_steps + 1);
  run.transports.resize(n_steps);
  run.residuals.resize(n_steps);
  run.measures[n_steps] = std::move(q);
  for (int n = n_steps - 1; n >= 0; --n) {
    const auto& t = traj.transports[n];
    auto s = [&] {
      if constexpr (std::is_same_v<Measure, Gaussian>) return inverse(t);
      else return invert_map(t);
    }();
    run.residuals[n] = inversion_residual(t, s, run.measures[n + 1]);
    run.measures[n] = pushforward(run.measures[n + 1], s);
    run.transports[n] = std::move(s);
  }
  return run;
}

}  // namespace

GaussianReverse run_reverse_exact(const GaussianTrajectory& traj) {
  return reverse_exact_impl<GaussianReverse>(traj, target_measure(traj));
}

GridReverse run_reverse_exact(const GridTrajectory& traj) {
  return reverse_exact_impl<GridReverse>(traj, target_measure(traj));
}

GaussianReverse run_reverse_perturbed(const GaussianTrajectory& traj, double eps_inv, const PerturbConfig& cfg,
                                      std::uint64_t seed) {
  require(eps_inv >= 0, "run_reverse_perturbed: eps_inv must be nonnegative");
  require(cfg.mode != PerturbMode::kGridBump, "run_reverse_perturbed: GRID_BUMP is 1-D grid only");
  GaussianReverse run = run_reverse_exact(traj);
  run.perturbed = true;
  run.eps_inv = eps_inv;
  if (eps_inv == 0) return run;
  const int n_steps = traj.steps();
  const auto d = traj.spec.dim();
  DirectionSource dirs(cfg, seed, d);
  for (int n = n_steps - 1; n >= 0; --n) {
    const Affine& t = traj.transports[n];
    const Affine exact_inv = inverse(t);
    const Gaussian& on = run.measures[n + 1];
    const PerturbConfig step_cfg = dirs.next(cfg);
    VectorXd u = VectorXd::Zero(d);
    u(0) = 1;
    if (step_cfg.direction) u = step_cfg.direction->normalized();
    const VectorXd c = pushforward(on, exact_inv).mean();
    auto build = [&](double a) {
      Affine s = exact_inv;
      if (cfg.mode == PerturbMode::kMeanShift) {
        s.offset += a * u;
      } else {
        s.linear *= (1 + a);
        s.offset = (1 + a) * (exact_inv.offset - c) + c;
      }
      return s;
    };
    const double a_max = cfg.mode == PerturbMode::kMeanShift ? 1e6 : 1e3;
    const double a = annotate(n + 1, [&] {
      return detail::calibrate_amplitude([&](double amp) { return inversion_residual(t, build(amp), on); },
                                         eps_inv, 1e-3, a_max, cfg.rel_tol);
    });
    Affine s = build(a);
    run.residuals[n] = inversion_residual(t, s, on);
    run.measures[n] = pushforward(on, s);
    run.transports[n] = std::move(s);
  }
  return run;
}

GridReverse run_reverse_perturbed(const GridTrajectory& traj, double eps_inv, const PerturbConfig& cfg,
                                  std::uint64_t seed) {
  require(eps_inv >= 0, "run_reverse_perturbed: eps_inv must be nonnegative");
  GridReverse run = run_reverse_exact(traj);
  run.perturbed = true;
  run.eps_inv = eps_inv;
  if (eps_inv == 0) return run;
  DirectionSource dirs(cfg, seed, 1);
  for (int n = traj.steps() - 1; n >= 0; --n) {
    const Map1D& t = traj.transports[n];
    const Map1D exact_inv = invert_map(t);
    const Grid& on = run.measures[n + 1];
    const VectorXd& x = on.values();
    const auto m = x.size();
    const VectorXd y = exact_inv(x);
    const PerturbConfig step_cfg = dirs.next(cfg);
    const double sign = (step_cfg.direction && (*step_cfg.direction)(0) < 0) ? -1.0 : 1.0;
    const double c = y.mean();

    VectorXd phi = VectorXd::Zero(m);
    double a_max = cfg.mode == PerturbMode::kDilation ? 1e3 : 1e6;
    if (cfg.mode == PerturbMode::kGridBump) {
      const double center = x(m / 2);
      const double width = cfg.bump_width_sds * std::sqrt(variance(on));
      for (Eigen::Index k = 0; k < m; ++k) phi(k) = sign * bump((x(k) - center) / width);
      for (Eigen::Index k = 0; k + 1 < m; ++k) {
        const double dx = x(k + 1) - x(k);
        const double ds = (phi(k + 1) - phi(k)) / dx;
        if (ds < 0) a_max = std::min(a_max, ((y(k + 1) - y(k)) / dx - kMinPerturbedSlope) / -ds);
      }
    }
    auto values = [&](double a) -> VectorXd {
      switch (cfg.mode) {
        case PerturbMode::kMeanShift: return (y.array() + sign * a).matrix();
        case PerturbMode::kDilation: return ((1 + a) * (y.array() - c) + c).matrix();
        case PerturbMode::kGridBump: return y + a * phi;
      }
      return y;
    };
    auto residual = [&](double a) {
      const VectorXd v = values(a);
      double acc = 0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double r = t(v(k)) - x(k);
        acc += r * r;
      }
      return std::sqrt(acc / static_cast<double>(m));
    };
    const double a = annotate(n + 1, [&] {
      return detail::calibrate_amplitude(residual, eps_inv, std::min(1e-3, a_max), a_max, cfg.rel_tol);
    });
    Map1D s(x, values(a));
    run.residuals[n] = inversion_residual(t, s, on);
    run.measures[n] = Grid(s.y());
    run.transports[n] = std::move(s);
  }
  return run;
}

Grid ou_smooth_grid(const AtomicMeasure& p, double delta, Eigen::Index m) {
  require(delta > 0, "ou_smooth: delta must be positive");
  require(p.dim() == 1, "ou_smooth: multi-atom smoothing is 1-D only");
  const double decay = std::exp(-delta);
  const double sd = std::sqrt(-std::expm1(-2 * delta));
  std::vector<double> means, sds(p.size(), sd);
  for (const auto& a : p.atoms) means.push_back(decay * a(0));
  return from_mixture<double>(p.weights, means, sds, m);
}

Gaussian ou_smooth_gaussian(const AtomicMeasure& p, double delta) {
  require(delta > 0, "ou_smooth: delta must be positive");
  require(p.size() == 1, "ou_smooth_gaussian: single atom required");
  const auto d = p.dim();
  const double var = -std::expm1(-2 * delta);
  return Gaussian(std::exp(-delta) * p.atoms[0], var * MatrixXd::Identity(d, d));
}

std::variant<Grid, Gaussian> ou_smooth(const AtomicMeasure& p, double delta, Eigen::Index m) {
  if (p.size() == 1) return ou_smooth_gaussian(p, delta);
  return ou_smooth_grid(p, delta, m);
}

namespace {

// ∫_{za}^{zb} (s z + e)² φ(z) dz.
double truncated_square_moment(double s, double e, double za, double zb) {
  auto prim = [&](double z) {
    if (std::isinf(z)) return z > 0 ? s * s + e * e : 0.0;
    const double phi = normal_pdf(z), cdf = normal_cdf(z);
    return s * s * (cdf - z * phi) - 2 * s * e * phi + e * e * cdf;
  };
  return prim(zb) - prim(za);
}

}  // namespace

double ou_w2_squared(const AtomicMeasure& p, double delta) {
  require(delta > 0, "ou_w2_squared: delta must be positive");
  const double decay = std::exp(-delta);
  const double var = -std::expm1(-2 * delta);
  if (p.size() == 1) {
    const double shrink = -std::expm1(-delta);
    return shrink * shrink * p.atoms[0].squaredNorm() + static_cast<double>(p.dim()) * var;
  }
  require(p.dim() == 1, "ou_w2_squared: multi-atom measures must be 1-D");
  const double s = std::sqrt(var);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return p.atoms[i](0) < p.atoms[j](0); });
  std::vector<double> x, w;
  for (auto i : order) {
    x.push_back(p.atoms[i](0));
    w.push_back(p.weights[i]);
  }
  auto cdf = [&](double y) {
    double f = 0;
    for (std::size_t j = 0; j < x.size(); ++j) f += w[j] * normal_cdf((y - decay * x[j]) / s);
    return f;
  };
  // The quantile of P equals x_i on (c_{i-1}, c_i]; its image boundaries are
  // b_i = F⁻¹(c_i) for the mixture CDF F.
  std::vector<double> b{-std::numeric_limits<double>::infinity()};
  double c = 0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    c += w[i];
    double lo = decay * x.front() - 40 * s, hi = decay * x.back() + 40 * s;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (cdf(mid) < c ? lo : hi) = mid;
    }
    b.push_back(0.5 * (lo + hi));
  }
  b.push_back(std::numeric_limits<double>::infinity());

  double total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double mu = decay * x[j];
      total += w[j] * truncated_square_moment(s, mu - x[i], (b[i] - mu) / s, (b[i + 1] - mu) / s);
    }
  }
  return total;
}

double inverse_lipschitz(const Affine& t) {
  return spectral_norm(inverse(t).linear);
}

double inverse_lipschitz(const Map1D& t) {
  return 1.0 / min_slope(t);
}

}  // namespace jkolab
