#include "jkolab/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace jkolab::oracles {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_det(const MatrixXd& a) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return -kInf;
  double s = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) s += std::log(llt.matrixL()(i, i));
  return 2 * s;
}

double log_z(const Objective& spec) {
  const double d = static_cast<double>(spec.dim());
  return 0.5 * d * std::log(2 * std::numbers::pi) - 0.5 * log_det(spec.potential.lambda_mat);
}

// Pool-adjacent-violators for a non-decreasing least-squares fit, then a
// sweep that restores strict increase.
VectorXd isotonic_repair(const VectorXd& x) {
  const auto n = x.size();
  std::vector<double> level;
  std::vector<Eigen::Index> count;
  for (Eigen::Index i = 0; i < n; ++i) {
    level.push_back(x(i));
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double c1 = static_cast<double>(count[count.size() - 2]), c2 = static_cast<double>(count.back());
      const double merged = (level[level.size() - 2] * c1 + level.back() * c2) / (c1 + c2);
      const Eigen::Index c = count[count.size() - 2] + count.back();
      level.pop_back();
      count.pop_back();
      level.back() = merged;
      count.back() = c;
    }
  }
  VectorXd out(n);
  Eigen::Index k = 0;
  for (std::size_t b = 0; b < level.size(); ++b)
    for (Eigen::Index j = 0; j < count[b]; ++j) out(k++) = level[b];
  const double jitter = 1e-6 * std::max(1.0, (out(n - 1) - out(0)) / static_cast<double>(n));
  for (Eigen::Index i = 1; i < n; ++i) out(i) = std::max(out(i), out(i - 1) + jitter);
  return out;
}

bool strictly_increasing(const VectorXd& q) {
  for (Eigen::Index k = 1; k < q.size(); ++k)
    if (!(q(k) > q(k - 1))) return false;
  return true;
}

struct GridObjective {
  const VectorXd& qn;
  const Objective& spec;
  double gamma;
  long* evals;

  double value(const VectorXd& q) const {
    ++*evals;
    if (!strictly_increasing(q)) return kInf;
    return objective_value(spec, q) + (q - qn).squaredNorm() / (2 * gamma * static_cast<double>(q.size()));
  }

  VectorXd gradient(const VectorXd& q) const {
    ++*evals;
    const auto m = q.size();
    const double mm = static_cast<double>(m);
    const double lam = spec.potential.lambda_mat(0, 0), c = spec.potential.center(0);
    VectorXd g(m);
    for (Eigen::Index k = 0; k < m; ++k) g(k) = (lam * (q(k) - c) + (q(k) - qn(k)) / gamma) / mm;
    for (Eigen::Index k = 0; k + 1 < m; ++k) {
      const double w = spec.alpha / (mm * (q(k + 1) - q(k)));
      g(k) += w;
      g(k + 1) -= w;
    }
    return g;
  }
};

// FISTA with backtracking on L and function-value restarts.
VectorXd accelerated_descent(const GridObjective& f, VectorXd x, long budget) {
  const long start = *f.evals;
  double fx = f.value(x);
  VectorXd y = x;
  double t = 1, lip = 1;
  while (*f.evals - start < budget) {
    double fy = f.value(y);
    if (!std::isfinite(fy)) {
      y = x;
      fy = fx;
      t = 1;
    }
    const VectorXd gy = f.gradient(y);
    if (gy.cwiseAbs().maxCoeff() * static_cast<double>(x.size()) <= 1e-10) {
      if (fy <= fx) x = y;
      break;
    }
    VectorXd z;
    double fz = kInf;
    for (int bt = 0; bt < 100; ++bt) {
      z = y - gy / lip;
      fz = f.value(z);
      const VectorXd dz = z - y;
      if (std::isfinite(fz) && fz <= fy + gy.dot(dz) + 0.5 * lip * dz.squaredNorm()) break;
      lip *= 2;
    }
    if (!std::isfinite(fz)) break;
    if (fz > fx) {  // momentum overshoot
      y = x;
      t = 1;
      continue;
    }
    const double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    y = z + ((t - 1) / t_next) * (z - x);
    x = std::move(z);
    fx = fz;
    t = t_next;
    lip *= 0.95;
  }
  return x;
}

class NelderMead {
 public:
  template <typename F>
  static VectorXd minimize(const F& f, VectorXd x0, double step, long budget, long& evals) {
    const auto n = x0.size();
    std::vector<VectorXd> pts{x0};
    for (Eigen::Index i = 0; i < n; ++i) {
      VectorXd p = x0;
      p(i) += step;
      pts.push_back(p);
    }
    std::vector<double> vals;
    for (const auto& p : pts) vals.push_back(f(p));
    evals += n + 1;
    const long stop = evals + budget;
    std::vector<std::size_t> idx(n + 1);
    while (evals < stop) {
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
      const auto best = idx.front(), worst = idx.back(), second = idx[n - 1];
      double size = 0;
      for (const auto& p : pts) size = std::max(size, (p - pts[best]).cwiseAbs().maxCoeff());
      if (vals[worst] - vals[best] <= 1e-16 * (1 + std::abs(vals[best])) && size < 1e-11) break;
      VectorXd centroid = VectorXd::Zero(n);
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (i != worst) centroid += pts[i];
      centroid /= static_cast<double>(n);
      const VectorXd xr = centroid + (centroid - pts[worst]);
      const double fr = f(xr);
      ++evals;
      if (fr < vals[best]) {
        const VectorXd xe = centroid + 2 * (centroid - pts[worst]);
        const double fe = f(xe);
        ++evals;
        if (fe < fr) {
          pts[worst] = xe;
          vals[worst] = fe;
        } else {
          pts[worst] = xr;
          vals[worst] = fr;
        }
      } else if (fr < vals[second]) {
        pts[worst] = xr;
        vals[worst] = fr;
      } else {
        const bool outside = fr < vals[worst];
        const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                    : VectorXd(centroid + 0.5 * (pts[worst] - centroid));
        const double fc = f(xc);
        ++evals;
        if (fc < std::min(fr, vals[worst])) {
          pts[worst] = xc;
          vals[worst] = fc;
        } else {
          for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i == best) continue;
            pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
            vals[i] = f(pts[i]);
            ++evals;
          }
        }
      }
    }
    const auto it = std::min_element(vals.begin(), vals.end());
    return pts[static_cast<std::size_t>(it - vals.begin())];
  }
};

struct GaussianParams {
  Eigen::Index d;

  Eigen::Index size() const { return d + d * (d + 1) / 2; }

  Gaussian decode(const VectorXd& theta) const {
    MatrixXd l = MatrixXd::Zero(d, d);
    Eigen::Index k = d;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) l(i, j) = (i == j) ? std::exp(theta(k++)) : theta(k++);
    const MatrixXd cov = l * l.transpose();
    return Gaussian(theta.head(d), 0.5 * (cov + cov.transpose()));
  }

  VectorXd encode(const Gaussian& g) const {
    VectorXd theta(size());
    theta.head(d) = g.mean();
    const MatrixXd l = Eigen::LLT<MatrixXd>(g.cov()).matrixL();
    Eigen::Index k = d;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) theta(k++) = (i == j) ? std::log(l(i, i)) : l(i, j);
    return theta;
  }
};

double quantile_at(const VectorXd& q, double u) {
  const auto m = q.size();
  const double pos = u * static_cast<double>(m) - 0.5;  // fractional knot index
  Eigen::Index k = static_cast<Eigen::Index>(std::floor(pos));
  k = std::clamp<Eigen::Index>(k, 0, m - 2);
  return q(k) + (pos - static_cast<double>(k)) * (q(k + 1) - q(k));
}

}  // namespace

double objective_value(const Objective& spec, const Gaussian& rho) {
  const auto& lam = spec.potential.lambda_mat;
  const VectorXd r = rho.mean() - spec.potential.center;
  double g = 0.5 * ((lam * rho.cov()).trace() + r.dot(lam * r)) + log_z(spec);
  if (spec.alpha > 0) {
    const double d = static_cast<double>(rho.dim());
    g += spec.alpha * (-0.5 * d * std::log(2 * std::numbers::pi * std::numbers::e) - 0.5 * log_det(rho.cov()));
  }
  return g;
}

double objective_value(const Objective& spec, const VectorXd& q) {
  const auto m = q.size();
  const double mm = static_cast<double>(m);
  const double lam = spec.potential.lambda_mat(0, 0), c = spec.potential.center(0);
  double s = 0;
  for (Eigen::Index k = 0; k < m; ++k) s += 0.5 * lam * (q(k) - c) * (q(k) - c);
  double h = 0;
  for (Eigen::Index k = 0; k + 1 < m; ++k) {
    const double gap = q(k + 1) - q(k);
    if (!(gap > 0)) return kInf;
    h -= std::log(mm * gap);
  }
  return (s + spec.alpha * h) / mm + log_z(spec);
}

double grid_proximal_objective(const Grid& p_n, const VectorXd& q, const Objective& spec, double gamma) {
  require(q.size() == p_n.size(), "grid_proximal_objective: size mismatch");
  return objective_value(spec, q) +
         (q - p_n.values()).squaredNorm() / (2 * gamma * static_cast<double>(q.size()));
}

double gaussian_proximal_objective(const Gaussian& p_n, const Gaussian& rho, const Objective& spec, double gamma) {
  return objective_value(spec, rho) + w2_bw_squared(p_n, rho) / (2 * gamma);
}

OracleResult<Grid> brute_jko(const Grid& p_n, const Objective& spec, double gamma, const OracleConfig& cfg) {
  require(spec.dim() == 1 && spec.alpha > 0, "brute_jko: grid oracle needs a 1-D entropy-bearing objective");
  require(cfg.budget >= 100000 && cfg.restarts > 0, "brute_jko: grid budget must be >= 1e5 evaluations");
  long evals = 0;
  const GridObjective f{p_n.values(), spec, gamma, &evals};
  std::mt19937_64 rng(cfg.seed);
  const double sd = std::sqrt(variance(p_n));
  VectorXd best;
  double best_val = kInf;
  for (int r = 0; r < cfg.restarts; ++r) {
    VectorXd start = p_n.values();
    if (r > 0) {
      std::normal_distribution<double> z(0.0, 0.1 * sd);
      for (Eigen::Index k = 0; k < start.size(); ++k) start(k) += z(rng);
      start = isotonic_repair(start);
    }
    VectorXd x = accelerated_descent(f, start, cfg.budget / cfg.restarts);
    const double v = f.value(x);
    if (v < best_val) {
      best_val = v;
      best = std::move(x);
    }
  }
  if (!std::isfinite(best_val)) throw BudgetExhausted("brute_jko: no feasible iterate within budget");
  return {Grid(best), best_val, evals};
}

OracleResult<Gaussian> brute_jko(const Gaussian& p_n, const Objective& spec, double gamma, const OracleConfig& cfg) {
  require(spec.alpha > 0, "brute_jko: Gaussian oracle needs an entropy-bearing objective");
  require(cfg.budget >= 10000, "brute_jko: Gaussian budget must be >= 1e4 evaluations");
  const GaussianParams params{p_n.dim()};
  auto f = [&](const VectorXd& theta) {
    const Gaussian g = params.decode(theta);
    const double v = gaussian_proximal_objective(p_n, g, spec, gamma);
    return std::isfinite(v) ? v : kInf;
  };
  long evals = 0;
  VectorXd theta = params.encode(p_n);
  double val = f(theta);
  double step = 0.5;
  while (evals < cfg.budget) {
    const VectorXd cand = NelderMead::minimize(f, theta, step, cfg.budget - evals, evals);
    const double cv = f(cand);
    ++evals;
    const bool improved = cv < val - 1e-15 * (1 + std::abs(val));
    if (cv < val) {
      theta = cand;
      val = cv;
    }
    if (!improved) {
      if (step < 1e-6) break;
      step *= 0.1;
    }
  }
  return {params.decode(theta), val, evals};
}

double empirical_w2_1d(const Grid& p, const Grid& q, int n_samples, std::uint64_t seed) {
  require(n_samples > 0, "empirical_w2_1d: need samples");
  std::mt19937_64 rng_p(seed), rng_q(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> a(n_samples), b(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    a[i] = quantile_at(p.values(), unif(rng_p));
    b[i] = quantile_at(q.values(), unif(rng_q));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double acc = 0;
  for (int i = 0; i < n_samples; ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc / n_samples);
}

double assignment_w2(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b) {
  require(a.size() == b.size() && !a.empty(), "assignment_w2: need equal non-empty point sets");
  if (a.size() > 2000) throw PreconditionError("assignment_w2: more than 2000 points");
  const std::size_t n = a.size();
  // Hungarian method with potentials, 1-based rows/columns.
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  auto cost = [&](std::size_t i, std::size_t j) { return (a[i - 1] - b[j - 1]).squaredNorm(); };
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0;
  for (std::size_t j = 1; j <= n; ++j) total += cost(p[j], j);
  return std::sqrt(total / static_cast<double>(n));
}

double quadrature_kl(const Grid& p, const Objective& spec) {
  require(spec.dim() == 1, "quadrature_kl: 1-D objective required");
  const VectorXd& q = p.values();
  const auto m = q.size();
  const double mm = static_cast<double>(m);
  const double lz = log_z(spec);
  auto cell = [&](double lo, double hi, double mass) {
    const double dens = mass / (hi - lo);
    const int sub = 16;
    const double h = (hi - lo) / sub;
    double acc = 0;
    for (int i = 0; i < sub; ++i) {
      const double x = lo + (i + 0.5) * h;
      acc += dens * (std::log(dens) + spec.potential.value_1d(x) + lz) * h;
    }
    return acc;
  };
  double kl = 0;
  for (Eigen::Index k = 0; k + 1 < m; ++k) kl += cell(q(k), q(k + 1), 1 / mm);
  kl += cell(q(0) - 0.5 * (q(1) - q(0)), q(0), 0.5 / mm);
  kl += cell(q(m - 1), q(m - 1) + 0.5 * (q(m - 1) - q(m - 2)), 0.5 / mm);
  return kl;
}

double quadrature_kl(const Gaussian& p, const Objective& spec) {
  require(p.dim() == 1 && spec.dim() == 1, "quadrature_kl: 1-D Gaussian required");
  const double m = p.mean()(0), s = std::sqrt(p.cov()(0, 0));
  const double lz = log_z(spec);
  const int n = 20000;
  const double lo = m - 14 * s, h = 28 * s / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    const double z = (x - m) / s;
    const double logf = -0.5 * z * z - std::log(s * std::sqrt(2 * std::numbers::pi));
    const double f = std::exp(logf);
    acc += f * (logf + spec.potential.value_1d(x) + lz) * ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2));
  }
  return acc * h / 3;
}

namespace {

Gaussian moved(const Gaussian& rho, const Affine& v, double s) {
  const auto d = rho.dim();
  const MatrixXd a = MatrixXd::Identity(d, d) + s * v.linear;
  const MatrixXd cov = a * rho.cov() * a.transpose();
  return Gaussian(a * rho.mean() + s * v.offset, 0.5 * (cov + cov.transpose()));
}

}  // namespace

double fd_directional(const Objective& spec, const Gaussian& rho, const Affine& v, double t) {
  return (objective_value(spec, moved(rho, v, t)) - objective_value(spec, moved(rho, v, -t))) / (2 * t);
}

double fd_directional(const Objective& spec, const Gaussian& p_n, double gamma, const Gaussian& rho, const Affine& v,
                      double t) {
  return (gaussian_proximal_objective(p_n, moved(rho, v, t), spec, gamma) -
          gaussian_proximal_objective(p_n, moved(rho, v, -t), spec, gamma)) /
         (2 * t);
}

double fd_directional(const Objective& spec, const Grid& p_n, double gamma, const Grid& rho, const VectorXd& v,
                      double t) {
  require(v.size() == rho.size(), "fd_directional: field size mismatch");
  const VectorXd plus = rho.values() + t * v, minus = rho.values() - t * v;
  return (grid_proximal_objective(p_n, plus, spec, gamma) - grid_proximal_objective(p_n, minus, spec, gamma)) / (2 * t);
}

double fd_directional(const Objective& spec, const Grid& rho, const VectorXd& v, double t) {
  require(v.size() == rho.size(), "fd_directional: field size mismatch");
  const VectorXd plus = rho.values() + t * v, minus = rho.values() - t * v;
  return (objective_value(spec, plus) - objective_value(spec, minus)) / (2 * t);
}

}  // namespace jkolab::oracles
