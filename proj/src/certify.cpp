#include "jkolab/certify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace jkolab {

namespace {

using Context = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double w2_squared(const Gaussian& a, const Gaussian& b) { return w2_bw_squared(a, b); }
double w2_squared(const Grid& a, const Grid& b) {
  const double v = w2(a, b);
  return v * v;
}
double w2_dist(const Gaussian& a, const Gaussian& b) { return w2_bw(a, b); }
double w2_dist(const Grid& a, const Grid& b) { return w2(a, b); }

double kl_measure(const Gaussian& a, const Gaussian& b) { return kl_between(a, b); }
double kl_measure(const Grid& a, const Grid& b) { return kl_between(a, b); }

double max_xi(const std::vector<double>& xi) {
  double e = 0;
  for (double v : xi) e = std::max(e, v);
  return e;
}

// Smallest ε for which the run length N already meets the step threshold
// (8/γλ)(log W2(p_0,q) + log(λ/ε)), floored at the measured residual.
double eps_for_length(double eps_measured, double w2_0, double lambda, double gamma, int n_steps) {
  if (!(w2_0 > 0)) return eps_measured;
  return std::max(eps_measured, w2_0 * lambda * std::exp(-n_steps * gamma * lambda / 8));
}

double threshold_steps(double w2_0, double lambda, double gamma, double eps) {
  if (!(eps > 0) || !(w2_0 > 0)) return std::numeric_limits<double>::infinity();
  return 8 / (gamma * lambda) * (std::log(w2_0) + std::log(lambda / eps));
}

Context base_context(const Objective& spec, double gamma) {
  return {{"gamma", num(gamma)}, {"lambda", num(spec.lambda)}, {"variant", std::string(to_string(spec.variant))}};
}

template <typename Traj, typename Measure>
std::vector<BoundReport> evi_impl(const Traj& traj, const Measure& pi, double eps) {
  const double g = traj.gamma, lam = traj.spec.lambda;
  const double tol = family_tol(pi);
  const double g_pi = evaluate(traj.spec, pi);
  std::vector<BoundReport> out;
  for (int n = 0; n < traj.steps(); ++n) {
    const auto& cur = traj.measures[n];
    const auto& next = traj.measures[n + 1];
    const double lhs = (1 + g * lam / 2) * w2_squared(next, pi) + 2 * g * (evaluate(traj.spec, next) - g_pi);
    const double rhs = w2_squared(cur, pi) + (2 * g / lam) * eps * eps;
    Context ctx = base_context(traj.spec, g);
    ctx.insert(ctx.begin(), {"n", std::to_string(n)});
    ctx.emplace_back("eps", num(eps));
    out.push_back(make_report("evi", lhs, rhs, tol, std::move(ctx)));
  }
  return out;
}

template <typename Traj>
std::vector<BoundReport> rate_impl(const Traj& traj) {
  const auto q = target_measure(traj);
  const double g = traj.gamma, lam = traj.spec.lambda;
  const double tol = family_tol(q);
  const double eps = max_xi(traj.xi_norms);
  const double w2sq_0 = w2_squared(traj.measures.front(), q);
  std::vector<BoundReport> out;
  for (int n = 0; n <= traj.steps(); ++n) {
    const double lhs = w2_squared(traj.measures[n], q);
    const double rhs = std::pow(1 + g * lam / 2, -n) * w2sq_0 + 4 * eps * eps / (lam * lam);
    Context ctx = base_context(traj.spec, g);
    ctx.insert(ctx.begin(), {"n", std::to_string(n)});
    ctx.emplace_back("eps", num(eps));
    out.push_back(make_report("forward_rate.rate", lhs, rhs, tol, std::move(ctx)));
  }
  const int n_steps = traj.steps();
  const double w2_0 = std::sqrt(w2sq_0);
  if (n_steps == 0 || !(w2_0 > 0)) return out;
  const double eps_used = eps_for_length(eps, w2_0, lam, g, n_steps);
  const double thr = threshold_steps(w2_0, lam, g, eps_used);
  Context ctx = base_context(traj.spec, g);
  ctx.insert(ctx.begin(), {"n", std::to_string(n_steps)});
  ctx.emplace_back("eps_measured", num(eps));
  ctx.emplace_back("eps", num(eps_used));
  ctx.emplace_back("threshold", num(thr));
  if (thr <= 0) ctx.emplace_back("threshold_vacuous", "1");
  const auto& p_last = traj.measures.back();
  out.push_back(make_report("forward_rate.terminal_w2", w2_dist(p_last, q), std::sqrt(5.0) * eps_used / lam, tol, ctx));
  const double gap = evaluate(traj.spec, p_last) - evaluate(traj.spec, q);
  out.push_back(make_report("forward_rate.terminal_gap", gap, 4.5 / g * (eps_used / lam) * (eps_used / lam), tol,
                            std::move(ctx)));
  return out;
}

// TV between two 1-D Gaussians by composite Simpson on a wide window.
double tv_gaussian_1d(const Gaussian& a, const Gaussian& b) {
  const double m1 = a.mean()(0), m2 = b.mean()(0);
  const double s1 = std::sqrt(a.cov()(0, 0)), s2 = std::sqrt(b.cov()(0, 0));
  const double lo = std::min(m1 - 12 * s1, m2 - 12 * s2);
  const double hi = std::max(m1 + 12 * s1, m2 + 12 * s2);
  const int n = 200000;
  const double h = (hi - lo) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    const double f = std::abs(normal_pdf((x - m1) / s1) / s1 - normal_pdf((x - m2) / s2) / s2);
    acc += f * ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2));
  }
  return std::clamp(0.5 * acc * h / 3, 0.0, 1.0);
}

template <typename Traj, typename Rev, typename TvFn>
std::vector<BoundReport> kl_tv_impl(const Traj& traj, const Rev& exact, TvFn&& tv_fn) {
  const auto q = target_measure(traj);
  const double g = traj.gamma, lam = traj.spec.lambda;
  const double tol = family_tol(q);
  const double eps = max_xi(traj.xi_norms);
  const double eps_used = eps_for_length(eps, w2_dist(traj.measures.front(), q), lam, g, traj.steps());
  const auto& p = traj.measures.front();
  const auto& q0 = exact.measures.front();
  const double kl = kl_measure(p, q0);
  Context ctx = base_context(traj.spec, g);
  ctx.insert(ctx.begin(), {"n", std::to_string(traj.steps())});
  ctx.emplace_back("eps_measured", num(eps));
  ctx.emplace_back("eps", num(eps_used));
  std::vector<BoundReport> out;
  out.push_back(make_report("kl_tv.kl", kl, 4.5 / g * (eps_used / lam) * (eps_used / lam), tol, ctx));
  auto [tv, method] = tv_fn(p, q0, kl);
  ctx.emplace_back("tv_method", method);
  out.push_back(make_report("kl_tv.tv", tv, 1.5 / std::sqrt(g) * eps_used / lam, tol, std::move(ctx)));
  return out;
}

double log_lipschitz(const Affine& s) { return std::log(spectral_norm(s.linear)); }
double log_lipschitz(const Map1D& s) { return std::log(lipschitz(s)); }

template <typename Traj, typename Rev>
std::vector<BoundReport> inversion_impl(const Traj& traj, const Rev& exact, const Rev& perturbed) {
  require(perturbed.measures.size() == exact.measures.size(), "check_inversion_bound: run lengths differ");
  const auto q = target_measure(traj);
  const double g = traj.gamma, lam = traj.spec.lambda;
  const double tol = family_tol(q);
  const int n_steps = traj.steps();
  const double eps_inv = perturbed.eps_inv;
  const double lhs = w2_dist(perturbed.measures.front(), exact.measures.front());
  double k = n_steps > 0 ? estimate_K(traj) : 0.0;
  for (const auto& s : perturbed.transports) k = std::max(k, log_lipschitz(s) / g);

  Context ctx = base_context(traj.spec, g);
  ctx.insert(ctx.begin(), {"n", std::to_string(n_steps)});
  ctx.emplace_back("eps_inv", num(eps_inv));
  ctx.emplace_back("K", num(k));
  std::vector<BoundReport> out;
  const double gk = g * k;
  if (gk <= 1e-12) {
    ctx.emplace_back("k_zero_limit", "1");
    const double rhs = eps_inv * (n_steps + 1);
    out.push_back(make_report("inversion.proposition", lhs, rhs, tol, ctx));
    out.push_back(make_report("inversion.mixed", lhs, rhs, tol, std::move(ctx)));
    return out;
  }
  out.push_back(make_report("inversion.proposition", lhs, eps_inv / gk * std::exp(gk * (n_steps + 1)), tol, ctx));

  // The mixed bound assumes N is the step count prescribed for ε. The
  // measured ε is used when it prescribes this N; otherwise the largest ε
  // that does (where the step threshold equals N - 1).
  const double w2_0 = w2_dist(traj.measures.front(), q);
  const double eps = max_xi(traj.xi_norms);
  double eps_used = w2_0 * lam * std::exp(-(n_steps - 1) * g * lam / 8);
  if (eps > 0 && w2_0 > 0 && steps_needed(w2_0, lam, g, eps) == n_steps) eps_used = eps;
  ctx.emplace_back("eps_measured", num(eps));
  ctx.emplace_back("eps", num(eps_used));
  const double power = 8 * k / lam;
  const double rhs = std::exp(2 * gk) / gk * std::pow(w2_0 * lam, power) * eps_inv / std::pow(eps_used, power);
  out.push_back(make_report("inversion.mixed", lhs, rhs, tol, std::move(ctx)));
  return out;
}

template <typename Traj, typename Rev>
BoundReport dpi_chain_impl(const Traj& traj, const Rev& exact, double tol) {
  const auto q = target_measure(traj);
  const double a = kl_measure(traj.measures.front(), exact.measures.front());
  const double b = kl_measure(traj.measures.back(), q);
  Context ctx = base_context(traj.spec, traj.gamma);
  ctx.insert(ctx.begin(), {"n", std::to_string(traj.steps())});
  ctx.emplace_back("kl_p0_q0", num(a));
  ctx.emplace_back("kl_pN_q", num(b));
  return make_report("dpi", std::abs(a - b), tol, 0.0, std::move(ctx));
}

template <typename Traj>
std::vector<BoundReport> descent_impl(const Traj& traj) {
  std::vector<BoundReport> out;
  for (int n = 0; n < traj.steps(); ++n) {
    if (traj.xi_norms[n] > 1e-6) continue;  // perturbed steps carry no descent guarantee
    const auto& cur = traj.measures[n];
    const auto& next = traj.measures[n + 1];
    const double lhs = evaluate(traj.spec, next) + w2_squared(cur, next) / (2 * traj.gamma);
    Context ctx = base_context(traj.spec, traj.gamma);
    ctx.insert(ctx.begin(), {"n", std::to_string(n)});
    out.push_back(make_report("descent", lhs, evaluate(traj.spec, cur), family_tol(cur), std::move(ctx)));
  }
  return out;
}

template <typename Traj, typename Rev, typename TvFn>
std::vector<BoundReport> certify_impl(const Traj& traj, const Rev& exact, const std::optional<Rev>& perturbed,
                                      const std::optional<SmoothingInput>& smoothing,
                                      const std::vector<std::string>& checks, TvFn&& tv_fn) {
  const auto& known = check_names();
  for (const auto& c : checks)
    require(std::find(known.begin(), known.end(), c) != known.end(), "certify: unknown check '" + c + "'");
  auto wanted = [&](const char* c) { return std::find(checks.begin(), checks.end(), c) != checks.end(); };
  const auto q = target_measure(traj);
  const bool kl_objective = traj.spec.variant == Variant::kKL;
  std::vector<BoundReport> out;
  auto append = [&](std::vector<BoundReport> r) { out.insert(out.end(), r.begin(), r.end()); };
  if (wanted("evi")) append(check_evi(traj, q, max_xi(traj.xi_norms)));
  if (wanted("forward_rate")) append(rate_impl(traj));
  if (wanted("kl_tv") && kl_objective) append(kl_tv_impl(traj, exact, tv_fn));
  if (wanted("dpi") && traj.spec.has_entropy()) out.push_back(check_dpi(traj, exact));
  if (wanted("inversion") && perturbed && perturbed->eps_inv > 0)
    append(check_inversion_bound(traj, exact, *perturbed));
  if (wanted("monotonicity")) {
    for (int n = 0; n < traj.steps(); ++n) {
      auto r = check_monotonicity(traj.measures[n], traj.measures[n + 1], q, traj.spec);
      r.context.insert(r.context.begin(), {"n", std::to_string(n)});
      out.push_back(std::move(r));
    }
  }
  if (wanted("descent")) append(descent_impl(traj));
  if (wanted("smoothing") && smoothing) out.push_back(check_smoothing(smoothing->atoms, smoothing->delta));
  return out;
}

}  // namespace

BoundReport make_report(std::string name, double lhs, double rhs, double tol,
                        std::vector<std::pair<std::string, std::string>> context) {
  BoundReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.tol = tol;
  r.holds = std::isfinite(lhs) && std::isfinite(rhs) && r.slack >= -tol;
  r.context = std::move(context);
  return r;
}

BoundReport check_monotonicity(const Gaussian& p, const Gaussian& rho, const Gaussian& pi, const Objective& spec,
                               double tol) {
  const Affine t_rho = ot_map_bw(p, rho);
  const Affine t_pi = ot_map_bw(p, pi);
  const Affine eta = subgradient_field(rho, spec);
  const double inner = field_inner(compose(eta, t_rho), t_pi - t_rho, p);
  const double lhs = inner + 0.5 * spec.lambda * w2_bw_squared(pi, rho);
  const double rhs = evaluate(spec, pi) - evaluate(spec, rho);
  return make_report("monotonicity", lhs, rhs, tol, {{"lambda", num(spec.lambda)}, {"dim", std::to_string(p.dim())}});
}

BoundReport check_monotonicity(const Grid& p, const Grid& rho, const Grid& pi, const Objective& spec, double tol) {
  detail::require_same_size(p.size(), rho.size(), "check_monotonicity");
  detail::require_same_size(p.size(), pi.size(), "check_monotonicity");
  // On the grid T_p^ρ sends Q_p,k to Q_ρ,k, so every term is a sum over k.
  const VectorXd eta = subgradient_field(rho, spec);
  const double inner = eta.dot(pi.values() - rho.values()) / static_cast<double>(p.size());
  const double w = w2(pi, rho);
  const double lhs = inner + 0.5 * spec.lambda * w * w;
  const double rhs = evaluate(spec, pi) - evaluate(spec, rho);
  return make_report("monotonicity", lhs, rhs, tol, {{"lambda", num(spec.lambda)}, {"M", std::to_string(p.size())}});
}

std::vector<BoundReport> check_evi(const GaussianTrajectory& traj, const Gaussian& pi, double eps_used) {
  return evi_impl(traj, pi, eps_used);
}

std::vector<BoundReport> check_evi(const GridTrajectory& traj, const Grid& pi, double eps_used) {
  return evi_impl(traj, pi, eps_used);
}

std::vector<BoundReport> check_forward_rate(const GaussianTrajectory& traj) { return rate_impl(traj); }
std::vector<BoundReport> check_forward_rate(const GridTrajectory& traj) { return rate_impl(traj); }

namespace {

std::pair<double, std::string> tv_gaussian(const Gaussian& p, const Gaussian& q0, double kl) {
  if (p.dim() == 1) return {tv_gaussian_1d(p, q0), "direct"};
  return {std::sqrt(kl / 2), "pinsker"};
}

std::pair<double, std::string> tv_grid(const Grid& p, const Grid& q0, double) { return {tv(p, q0), "direct"}; }

}  // namespace

std::vector<BoundReport> check_kl_tv_guarantee(const GaussianTrajectory& traj, const GaussianReverse& exact) {
  return kl_tv_impl(traj, exact, tv_gaussian);
}

std::vector<BoundReport> check_kl_tv_guarantee(const GridTrajectory& traj, const GridReverse& exact) {
  return kl_tv_impl(traj, exact, tv_grid);
}

std::vector<BoundReport> check_inversion_bound(const GaussianTrajectory& traj, const GaussianReverse& exact,
                                               const GaussianReverse& perturbed) {
  return inversion_impl(traj, exact, perturbed);
}

std::vector<BoundReport> check_inversion_bound(const GridTrajectory& traj, const GridReverse& exact,
                                               const GridReverse& perturbed) {
  return inversion_impl(traj, exact, perturbed);
}

BoundReport check_dpi(const Gaussian& p, const Gaussian& q, const Affine& t) {
  const double a = kl_between(p, q);
  const double b = kl_between(pushforward(p, t), pushforward(q, t));
  return make_report("dpi", std::abs(a - b), kGaussianDpiTol, 0.0, {{"kl_before", num(a)}, {"kl_after", num(b)}});
}

BoundReport check_dpi(const Grid& p, const Grid& q, const Map1D& t) {
  const double a = kl_between(p, q);
  const double b = kl_between(pushforward(p, t), pushforward(q, t));
  return make_report("dpi", std::abs(a - b), kGridDpiTol, 0.0, {{"kl_before", num(a)}, {"kl_after", num(b)}});
}

BoundReport check_dpi(const GaussianTrajectory& traj, const GaussianReverse& exact) {
  return dpi_chain_impl(traj, exact, kGaussianDpiTol);
}

BoundReport check_dpi(const GridTrajectory& traj, const GridReverse& exact) {
  return dpi_chain_impl(traj, exact, kGridDpiTol);
}

BoundReport check_smoothing(const AtomicMeasure& p, double delta) {
  const double lhs = ou_w2_squared(p, delta);
  const double d = static_cast<double>(p.dim());
  const double rhs = delta * delta * p.second_moment() + 2 * delta * d;
  return make_report("smoothing", lhs, rhs, 1e-12,
                     {{"delta", num(delta)}, {"atoms", std::to_string(p.size())}, {"dim", std::to_string(p.dim())}});
}

std::vector<BoundReport> check_descent(const GaussianTrajectory& traj) { return descent_impl(traj); }
std::vector<BoundReport> check_descent(const GridTrajectory& traj) { return descent_impl(traj); }

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names{"evi",       "forward_rate", "kl_tv",   "dpi",
                                              "inversion", "monotonicity", "descent", "smoothing"};
  return names;
}

std::vector<BoundReport> certify_run(const GaussianTrajectory& traj, const GaussianReverse& exact,
                                     const std::optional<GaussianReverse>& perturbed,
                                     const std::optional<SmoothingInput>& smoothing,
                                     const std::vector<std::string>& checks) {
  return certify_impl(traj, exact, perturbed, smoothing, checks, tv_gaussian);
}

std::vector<BoundReport> certify_run(const GridTrajectory& traj, const GridReverse& exact,
                                     const std::optional<GridReverse>& perturbed,
                                     const std::optional<SmoothingInput>& smoothing,
                                     const std::vector<std::string>& checks) {
  return certify_impl(traj, exact, perturbed, smoothing, checks, tv_grid);
}

std::string check_family(const std::string& report_name) {
  return report_name.substr(0, report_name.find('.'));
}

}  // namespace jkolab
