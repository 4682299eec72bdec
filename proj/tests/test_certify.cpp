#include "jkolab/certify.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace jkolab;

namespace {

std::string context_value(const BoundReport& r, const std::string& key) {
  for (const auto& [k, v] : r.context)
    if (k == key) return v;
  return {};
}

const BoundReport& find(const std::vector<BoundReport>& rs, const std::string& name) {
  const auto it = std::find_if(rs.begin(), rs.end(), [&](const auto& r) { return r.name == name; });
  REQUIRE(it != rs.end());
  return *it;
}

Objective potential_only() {
  return make_objective<double>(MatrixXd::Identity(1, 1), VectorXd::Zero(1), Variant::kPotentialOnly, 0.0);
}

// Random increasing piecewise-linear map with a knot at every grid point of
// p, the shape of the transports a run produces. Log-slopes follow a random
// three-term Fourier profile, so slopes range over roughly [0.3, 3].
Map1D random_monotone_map(std::mt19937_64& rng, const Grid& p) {
  std::normal_distribution<double> z(0, 0.4);
  const double a1 = z(rng), a2 = z(rng), a3 = z(rng), shift = z(rng);
  const Eigen::Index m = p.size();
  const double lo = p[0], width = p[m - 1] - p[0];
  VectorXd y(m);
  y(0) = shift;
  for (Eigen::Index k = 1; k < m; ++k) {
    const double s = (0.5 * (p[k] + p[k - 1]) - lo) / width;
    const double log_slope = a1 * std::sin(M_PI * s) + a2 * std::cos(2 * M_PI * s) + a3 * std::sin(3 * M_PI * s);
    y(k) = y(k - 1) + std::exp(log_slope) * (p[k] - p[k - 1]);
  }
  return Map1D(p.values(), y);
}

}  // namespace

TEST_CASE("make_report semantics") {
  const auto r = make_report("x", 1.0, 2.0, 0.0, {{"n", "3"}});
  CHECK(r.slack == 1.0);
  CHECK(r.holds);
  CHECK(make_report("x", 1.0 + 1e-9, 1.0, 1e-8).holds);
  CHECK_FALSE(make_report("x", 1.0 + 1e-7, 1.0, 1e-8).holds);
  CHECK_FALSE(make_report("x", std::nan(""), 1.0, 1.0).holds);
  CHECK_FALSE(make_report("x", 0.0, HUGE_VAL, 1.0).holds);
  CHECK(context_value(r, "n") == "3");
}

TEST_CASE("monotonicity equality case") {
  const auto spec = standard_normal_objective<double>(1);
  const auto r = check_monotonicity(Gaussian::scalar(0, 1), Gaussian::scalar(1, 1), Gaussian::scalar(-1, 1), spec);
  CHECK(r.rhs == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(r.rhs) <= 1e-12);
  CHECK(r.lhs == doctest::Approx(0.0).scale(1));
  CHECK(std::abs(r.slack) <= 1e-10);
  CHECK(r.holds);
  const auto same = check_monotonicity(Gaussian::scalar(0, 1), Gaussian::scalar(1, 2), Gaussian::scalar(1, 2), spec);
  CHECK(std::abs(same.lhs) <= 1e-14);
  CHECK(std::abs(same.rhs) <= 1e-14);
}

TEST_CASE("monotonicity on random Gaussian triples") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const auto spec = make_objective<double>(testing::random_spd(rng, d, 0.2, 2.0), testing::random_vector(rng, d),
                                             t % 2 ? Variant::kKL : Variant::kWeighted, t % 2 ? 1.0 : 0.5);
    const auto r = check_monotonicity(testing::random_gaussian(rng, d), testing::random_gaussian(rng, d),
                                      testing::random_gaussian(rng, d), spec);
    CHECK(r.holds);
    CHECK(r.tol == kGaussianTol);
  }
}

TEST_CASE("monotonicity on grids") {
  std::mt19937_64 rng(2);
  const auto spec = standard_normal_objective<double>(1);
  for (int t = 0; t < 10; ++t) {
    const auto r = check_monotonicity(testing::random_mixture_grid(rng, 1024), testing::random_mixture_grid(rng, 1024),
                                      testing::random_mixture_grid(rng, 1024), spec);
    CHECK(r.holds);
  }
}

TEST_CASE("EVI on the exact chain") {
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  const auto reports = check_evi(traj, global_minimizer(spec), 0.0);
  REQUIRE(reports.size() == 5);
  CHECK(reports[0].lhs == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(reports[0].rhs == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(reports[0].slack == doctest::Approx(1.5).epsilon(1e-12));
  for (const auto& r : reports) {
    CHECK(r.holds);
    CHECK(r.slack >= 0);
  }
  // π = p_{n+1}: left side vanishes.
  const auto self = check_evi(traj, traj.measures[1], 0.0);
  CHECK(std::abs(self[0].lhs) <= 1e-12);
  CHECK(self[0].holds);
}

TEST_CASE("EVI on perturbed runs") {
  const auto spec = standard_normal_objective<double>(2);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Gaussian p0(VectorXd::Constant(2, 2.0), MatrixXd::Identity(2, 2) * 0.5);
    const auto traj = run_forward(p0, spec, 1.0, 10, std::vector<double>(10, 0.1), {}, seed);
    const double eps = *std::max_element(traj.xi_norms.begin(), traj.xi_norms.end());
    for (const auto& r : check_evi(traj, global_minimizer(spec), eps)) CHECK(r.holds);
  }
}

TEST_CASE("forward rate") {
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 6, std::vector<double>(6, 0.0));
  const auto reports = check_forward_rate(traj);
  int rate_count = 0;
  for (const auto& r : reports) {
    CHECK(r.holds);
    if (r.name != "forward_rate.rate") continue;
    const int n = std::stoi(context_value(r, "n"));
    CHECK(r.lhs == doctest::Approx(4.0 * std::pow(0.25, n)).epsilon(1e-10));
    CHECK(r.rhs == doctest::Approx(4.0 * std::pow(1.5, -n)).epsilon(1e-10));
    if (n > 0) CHECK(r.slack > 0);
    ++rate_count;
  }
  CHECK(rate_count == 7);
  CHECK(find(reports, "forward_rate.rate").slack == doctest::Approx(0.0));
  CHECK(check_family("forward_rate.terminal_w2") == "forward_rate");
}

TEST_CASE("forward rate terminal reports at eps 0.05") {
  const auto spec = standard_normal_objective<double>(1);
  const auto p0 = Gaussian::scalar(3, 1);
  const int n = steps_needed(3.0, 1.0, 1.0, 0.05);
  const auto traj = run_forward(p0, spec, 1.0, n, std::vector<double>(n, 0.05));
  const auto reports = check_forward_rate(traj);
  const auto& w = find(reports, "forward_rate.terminal_w2");
  const auto& gap = find(reports, "forward_rate.terminal_gap");
  CHECK(w.holds);
  CHECK(gap.holds);
  const double eps_used = std::stod(context_value(w, "eps"));
  CHECK(eps_used >= 0.05 * 0.99);
  if (eps_used <= 0.05 * 1.01) {
    CHECK(w.rhs == doctest::Approx(std::sqrt(5.0) * 0.05).epsilon(2e-2));
    CHECK(gap.rhs == doctest::Approx(0.01125).epsilon(3e-2));
  }
}

TEST_CASE("KL and TV guarantee") {
  const auto spec = standard_normal_objective<double>(1);
  const auto exact = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  for (const auto& r : check_kl_tv_guarantee(exact, run_reverse_exact(exact))) CHECK(r.holds);

  const int n = steps_needed(3.0, 1.0, 1.0, 0.1);
  const auto traj = run_forward(Gaussian::scalar(3, 1), spec, 1.0, n, std::vector<double>(n, 0.1));
  const auto rs = check_kl_tv_guarantee(traj, run_reverse_exact(traj));
  const auto& kl = find(rs, "kl_tv.kl");
  const auto& tvr = find(rs, "kl_tv.tv");
  CHECK(kl.holds);
  CHECK(tvr.holds);
  CHECK(context_value(tvr, "tv_method") == "direct");
  CHECK(kl.rhs == doctest::Approx(0.045).epsilon(3e-2));
  CHECK(tvr.rhs == doctest::Approx(0.15).epsilon(2e-2));
  // Pinsker consistency as a computed comparison.
  CHECK(std::sqrt(kl.lhs / 2) <= tvr.rhs);

  const auto spec2 = standard_normal_objective<double>(2);
  const Gaussian p2(VectorXd::Constant(2, 2.0), MatrixXd::Identity(2, 2));
  const auto t2 = run_forward(p2, spec2, 1.0, 4, std::vector<double>(4, 0.0));
  CHECK(context_value(find(check_kl_tv_guarantee(t2, run_reverse_exact(t2)), "kl_tv.tv"), "tv_method") == "pinsker");
}

TEST_CASE("inversion bound") {
  const auto spec = potential_only();
  const auto traj = run_forward(Gaussian::scalar(1, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  const auto exact = run_reverse_exact(traj);
  const auto pert = run_reverse_perturbed(traj, 1e-3);
  const auto rs = check_inversion_bound(traj, exact, pert);
  const auto& prop = find(rs, "inversion.proposition");
  CHECK(prop.rhs == doctest::Approx(1e-3 / std::log(2.0) * 64).epsilon(1e-6));
  CHECK(prop.rhs == doctest::Approx(0.0923).epsilon(1e-3));
  CHECK(prop.lhs > 0);
  CHECK(prop.lhs == doctest::Approx(w2_bw(pert.measures[0], exact.measures[0])));
  for (const auto& r : rs) CHECK(r.holds);

  const auto zero = check_inversion_bound(traj, exact, run_reverse_perturbed(traj, 0.0));
  for (const auto& r : zero) {
    CHECK(r.lhs == 0.0);
    CHECK(r.holds);
  }

  const auto traj2 = run_forward(Gaussian::scalar(1, 1), spec, 1.0, 10, std::vector<double>(10, 0.0));
  const auto rs2 =
      check_inversion_bound(traj2, run_reverse_exact(traj2), run_reverse_perturbed(traj2, 1e-3));
  const auto& prop2 = find(rs2, "inversion.proposition");
  CHECK(prop2.rhs / prop.rhs == doctest::Approx(std::exp(std::log(2.0) * 5)).epsilon(1e-9));
  CHECK(prop2.holds);
}

TEST_CASE("inversion bound at K = 0") {
  // KL flow with exact steps at the minimizer: identity transports.
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(0, 1), spec, 1.0, 3, std::vector<double>(3, 0.0));
  const auto rs = check_inversion_bound(traj, run_reverse_exact(traj), run_reverse_perturbed(traj, 1e-3));
  const auto& prop = find(rs, "inversion.proposition");
  CHECK(context_value(prop, "k_zero_limit") == "1");
  CHECK(prop.rhs == doctest::Approx(4e-3));
  CHECK(prop.holds);
}

TEST_CASE("dpi examples") {
  const Affine id{MatrixXd::Identity(1, 1), VectorXd::Zero(1)};
  const auto r0 = check_dpi(Gaussian::scalar(0, 1), Gaussian::scalar(1, 1), id);
  CHECK(r0.lhs == 0.0);
  const Affine t{MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, 1.0)};
  const auto r = check_dpi(Gaussian::scalar(0, 1), Gaussian::scalar(1, 1), t);
  CHECK(std::stod(context_value(r, "kl_before")) == doctest::Approx(0.5));
  CHECK(std::stod(context_value(r, "kl_after")) == doctest::Approx(0.5));
  CHECK(r.holds);
  CHECK(r.rhs == kGaussianDpiTol);
}

TEST_CASE("dpi under random monotone maps on grids") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    // q's grid spans p's: the knot-interpolated log-density of q is only
    // extrapolated linearly, which a curved map does not preserve.
    const auto p = from_gaussian(std::uniform_real_distribution<double>(-0.5, 0.5)(rng), 1.0, 4096);
    const auto q = from_gaussian(0.0, std::uniform_real_distribution<double>(1.2, 1.6)(rng), 4096);
    const auto map = random_monotone_map(rng, p);
    const auto r = check_dpi(p, q, map);
    CHECK(r.holds);
    CHECK(r.rhs == kGridDpiTol);
  }
}

TEST_CASE("dpi on run chains") {
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  CHECK(check_dpi(traj, run_reverse_exact(traj)).holds);
}

TEST_CASE("smoothing") {
  for (double delta : {1e-3, 0.1, 2.0}) {
    const auto r = check_smoothing(AtomicMeasure({VectorXd::Zero(2)}, {1.0}), delta);
    // W2² from N(0, s²I) to the point mass at 0 is d·s².
    CHECK(r.lhs == doctest::Approx(2 * (1 - std::exp(-2 * delta))).epsilon(1e-12));
    CHECK(r.rhs == doctest::Approx(4 * delta));
    CHECK(r.holds);
  }
  const AtomicMeasure two({VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)}, {0.5, 0.5});
  const auto r = check_smoothing(two, 0.01);
  CHECK(r.rhs == doctest::Approx(0.0201).epsilon(1e-12));
  CHECK(r.holds);
  const auto big = check_smoothing(two, 10.0);
  CHECK(big.rhs == doctest::Approx(120.0));
  CHECK(big.lhs < 3);
  CHECK(big.holds);
}

TEST_CASE("descent") {
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  const auto rs = check_descent(traj);
  CHECK(rs.size() == 5);
  for (const auto& r : rs) CHECK(r.holds);
}

TEST_CASE("certify_run gating and names") {
  CHECK(check_names().size() == 8);
  const auto spec = potential_only();
  const auto traj = run_forward(Gaussian::scalar(1, 1), spec, 1.0, 5, std::vector<double>(5, 0.0));
  const auto exact = run_reverse_exact(traj);
  const auto all = certify_run(traj, exact, std::nullopt, std::nullopt, {});
  for (const auto& r : all) {
    CHECK(r.holds);
    CHECK(check_family(r.name) != "kl_tv");
    CHECK(check_family(r.name) != "dpi");
    CHECK(check_family(r.name) != "inversion");
    CHECK(check_family(r.name) != "smoothing");
  }
  const auto only = certify_run(traj, exact, run_reverse_perturbed(traj, 1e-3), std::nullopt, {"inversion"});
  CHECK(only.size() == 2);
  CHECK_THROWS_AS(certify_run(traj, exact, std::nullopt, std::nullopt, {"bogus"}), PreconditionError);
  CHECK(check_family("evi") == "evi");
}

TEST_CASE("reports are re-runnable") {
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(Gaussian::scalar(2, 1), spec, 1.0, 4, std::vector<double>(4, 0.05), {}, 4);
  const auto exact = run_reverse_exact(traj);
  const auto a = certify_run(traj, exact, std::nullopt, std::nullopt, {});
  const auto b = certify_run(traj, exact, std::nullopt, std::nullopt, {});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].lhs == b[i].lhs);
    CHECK(a[i].rhs == b[i].rhs);
    CHECK(a[i].holds == b[i].holds);
  }
}
