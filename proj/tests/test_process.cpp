#include "jkolab/process.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace jkolab;

namespace {

// ∫ (Q_ρ(u) - Q_P(u))² du by midpoint rule on the grid's own levels, with
// the atomic quantile function evaluated as a step function.
double w2_sq_grid_vs_atoms(const Grid& g, const AtomicMeasure& p) {
  std::vector<std::size_t> order(p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p.atoms[a](0) < p.atoms[b](0); });
  double acc = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double u = g.level(k);
    double cum = 0, x = p.atoms[order.back()](0);
    for (auto i : order) {
      cum += p.weights[i];
      if (u < cum) {
        x = p.atoms[i](0);
        break;
      }
    }
    acc += (g[k] - x) * (g[k] - x);
  }
  return acc / static_cast<double>(g.size());
}

AtomicMeasure two_atoms() {
  return AtomicMeasure({VectorXd::Constant(1, -1.0), VectorXd::Constant(1, 1.0)}, {0.5, 0.5});
}

GaussianTrajectory exact_chain(int n) {
  return run_forward(Gaussian::scalar(2, 1), standard_normal_objective<double>(1), 1.0, n, std::vector<double>(n, 0.0));
}

}  // namespace

TEST_CASE("steps_needed") {
  CHECK(steps_needed(4.0, 1.0, 1.0, 0.01) == 48);
  CHECK(steps_needed(4.0, 1.0, 1.0, 0.01) == static_cast<int>(std::ceil(8 * (std::log(4.0) + std::log(100.0)))));
  CHECK(steps_needed(1.0, 0.5, 1.0, 0.5) == 1);
  CHECK(steps_needed(0.1, 1.0, 1.0, 1.0) == 1);
  for (double gamma : {0.3, 1.0, 1.7})
    for (double lambda : {0.2, 1.0})
      for (double eps : {1e-1, 1e-2, 1e-3}) {
        const int jump = static_cast<int>(std::ceil(8 * std::log(2.0) / (gamma * lambda)));
        const int diff = steps_needed(3.0, lambda, gamma, eps / 2) - steps_needed(3.0, lambda, gamma, eps);
        CHECK((diff == jump || diff == jump - 1));
      }
  CHECK_THROWS_AS(steps_needed(0.0, 1.0, 1.0, 0.1), PreconditionError);
  CHECK_THROWS_AS(steps_needed(1.0, 1.0, 1.0, 0.0), PreconditionError);
}

TEST_CASE("exact Gaussian forward chain") {
  const auto traj = exact_chain(5);
  REQUIRE(traj.measures.size() == 6);
  REQUIRE(traj.transports.size() == 5);
  double m = 2;
  for (const auto& p : traj.measures) {
    CHECK(p.mean()(0) == doctest::Approx(m).epsilon(1e-12));
    CHECK(p.cov()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    m /= 2;
  }
  for (int n = 0; n < 5; ++n) {
    const auto pushed = pushforward(traj.measures[n], traj.transports[n]);
    CHECK(w2_bw(pushed, traj.measures[n + 1]) < 1e-12);
    CHECK(traj.xi_norms[n] <= 1e-9);
  }
}

TEST_CASE("empty forward run") {
  const auto traj = exact_chain(0);
  CHECK(traj.measures.size() == 1);
  CHECK(traj.transports.empty());
  CHECK(traj.xi_norms.empty());
  const auto rev = run_reverse_exact(traj);
  REQUIRE(rev.measures.size() == 1);
  CHECK(rev.measures[0] == global_minimizer(traj.spec));
  CHECK_THROWS_AS(estimate_K(traj), PreconditionError);
}

TEST_CASE("forward schedule validation and determinism") {
  const auto spec = standard_normal_objective<double>(2);
  const Gaussian p0(VectorXd::Constant(2, 3.0), MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(run_forward(p0, spec, 1.0, 3, {0.1, 0.1}), PreconditionError);
  CHECK_THROWS_AS(run_forward(p0, spec, 1.0, 2, {0.1, -0.1}), PreconditionError);

  const std::vector<double> eps{0.1, 0.05, 0.0, 0.2};
  const auto a = run_forward(p0, spec, 0.8, 4, eps, {}, 7);
  const auto b = run_forward(p0, spec, 0.8, 4, eps, {}, 7);
  for (int n = 0; n <= 4; ++n) CHECK(a.measures[n] == b.measures[n]);
  for (int n = 0; n < 4; ++n) {
    if (eps[n] == 0) {
      CHECK(a.xi_norms[n] <= 1e-9);
    } else {
      CHECK(a.xi_norms[n] == doctest::Approx(eps[n]).epsilon(1e-2));
      CHECK(measure_xi(a.measures[n], a.measures[n + 1], spec, 0.8).norm == doctest::Approx(a.xi_norms[n]).epsilon(1e-9));
    }
  }
  const auto c = run_forward(p0, spec, 0.8, 4, eps, {}, 8);
  CHECK_FALSE(c.measures[4] == a.measures[4]);
}

TEST_CASE("grid forward run satisfies the pushforward invariant") {
  std::mt19937_64 rng(1);
  const auto p0 = testing::random_mixture_grid(rng, 1024);
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(p0, spec, 1.0, 4, std::vector<double>(4, 0.05), {}, 3);
  for (int n = 0; n < 4; ++n) {
    const auto pushed = pushforward(traj.measures[n], traj.transports[n]);
    CHECK((pushed.values() - traj.measures[n + 1].values()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(traj.xi_norms[n] == doctest::Approx(0.05).epsilon(1e-2));
  }
}

TEST_CASE("exact reverse reproduces KL along the chain") {
  const auto traj = exact_chain(5);
  const auto rev = run_reverse_exact(traj);
  REQUIRE(rev.measures.size() == 6);
  for (double r : rev.residuals) CHECK(r <= 1e-10);
  const auto& q = global_minimizer(traj.spec);
  CHECK(kl_between(traj.measures[0], rev.measures[0]) ==
        doctest::Approx(kl_between(traj.measures[5], q)).epsilon(1e-10));
  CHECK(std::abs(kl_between(traj.measures[0], rev.measures[0]) - kl_between(traj.measures[5], q)) <= 1e-10);

  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const auto spec = make_objective<double>(testing::random_spd(rng, d, 0.3, 1.0), testing::random_vector(rng, d),
                                             Variant::kKL, 1.0);
    const auto tr = run_forward(testing::random_gaussian(rng, d), spec, 0.9, 6, std::vector<double>(6, 0.05), {}, t + 1);
    const auto rv = run_reverse_exact(tr);
    CHECK(std::abs(kl_between(tr.measures[0], rv.measures[0]) - kl_between(tr.measures[6], rv.measures[6])) <= 1e-10);
  }
}

TEST_CASE("grid exact reverse reproduces KL") {
  std::mt19937_64 rng(3);
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(testing::random_mixture_grid(rng, 4096), spec, 1.0, 5, std::vector<double>(5, 0.0));
  const auto rev = run_reverse_exact(traj);
  for (double r : rev.residuals) CHECK(r <= 1e-10);
  CHECK(std::abs(kl_between(traj.measures[0], rev.measures[0]) - kl_between(traj.measures[5], rev.measures[5])) <=
        1e-4);
}

TEST_CASE("perturbed reverse") {
  const auto traj = run_forward(Gaussian::scalar(1, 1),
                                make_objective<double>(MatrixXd::Identity(1, 1), VectorXd::Zero(1),
                                                       Variant::kPotentialOnly, 0.0),
                                1.0, 5, std::vector<double>(5, 0.0));
  const auto exact = run_reverse_exact(traj);
  const auto zero = run_reverse_perturbed(traj, 0.0);
  for (std::size_t n = 0; n < exact.measures.size(); ++n) CHECK(zero.measures[n] == exact.measures[n]);
  for (std::size_t n = 0; n < exact.transports.size(); ++n) CHECK(zero.transports[n] == exact.transports[n]);

  const auto pert = run_reverse_perturbed(traj, 1e-3);
  CHECK(pert.perturbed);
  for (double r : pert.residuals) CHECK(r == doctest::Approx(1e-3).epsilon(1e-2));
  // Forward slopes are 1/2, so each calibrated offset is ε_inv · 2.
  for (int n = 0; n < 5; ++n) {
    const double offset_gap = pert.transports[n].offset(0) - exact.transports[n].offset(0);
    CHECK(std::abs(offset_gap) == doctest::Approx(2e-3).epsilon(1e-2));
  }
  CHECK(w2_bw(pert.measures[0], exact.measures[0]) > 0);
  CHECK_THROWS_AS(run_reverse_perturbed(traj, -1.0), PreconditionError);
}

TEST_CASE("grid perturbed reverse") {
  std::mt19937_64 rng(4);
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(testing::random_mixture_grid(rng, 1024), spec, 1.0, 4, std::vector<double>(4, 0.0));
  const auto exact = run_reverse_exact(traj);
  const auto zero = run_reverse_perturbed(traj, 0.0);
  for (std::size_t n = 0; n < exact.measures.size(); ++n) CHECK(zero.measures[n] == exact.measures[n]);
  const auto pert = run_reverse_perturbed(traj, 1e-3, {}, 5);
  for (double r : pert.residuals) CHECK(r == doctest::Approx(1e-3).epsilon(1e-2));
  CHECK(w2(pert.measures[0], exact.measures[0]) > 0);
}

TEST_CASE("OU smoothing of a single atom") {
  for (double delta : {1e-3, 0.1, 1.0}) {
    const VectorXd x0 = (VectorXd(2) << 1.5, -0.5).finished();
    const auto g = ou_smooth_gaussian(AtomicMeasure({x0}, {1.0}), delta);
    CHECK((g.mean() - std::exp(-delta) * x0).norm() < 1e-15);
    CHECK((g.cov() - (1 - std::exp(-2 * delta)) * MatrixXd::Identity(2, 2)).norm() < 1e-15);
  }
  const auto far = ou_smooth_gaussian(AtomicMeasure({VectorXd::Zero(1)}, {1.0}), 10.0);
  // Same-mean 1-D Gaussians: W2 = |σ₁ - σ₂|; the BW closed form loses this to
  // cancellation at 1e-8.
  CHECK(far.mean()(0) == 0.0);
  CHECK(std::abs(std::sqrt(far.cov()(0, 0)) - 1) <= 2e-9);
  CHECK(w2_bw(far, Gaussian::scalar(0, 1)) <= 1e-7);
  CHECK(std::holds_alternative<Gaussian>(ou_smooth(AtomicMeasure({VectorXd::Zero(3)}, {1.0}), 0.1, 64)));
}

TEST_CASE("OU smoothing of two atoms") {
  const auto p = two_atoms();
  const auto g = ou_smooth_grid(p, 0.01, 4096);
  const double lhs = w2_sq_grid_vs_atoms(g, p);
  CHECK(lhs <= 0.0201);
  CHECK(ou_w2_squared(p, 0.01) == doctest::Approx(lhs).epsilon(1e-2));
  CHECK(std::sqrt(w2_sq_grid_vs_atoms(ou_smooth_grid(p, 1e-4, 4096), p)) < 0.03);
  CHECK(std::holds_alternative<Grid>(ou_smooth(p, 0.01, 64)));
  // Symmetric atoms give a symmetric grid.
  for (Eigen::Index k = 0; k < 4096; ++k) CHECK(std::abs(g[k] + g[4095 - k]) < 1e-9);
}

TEST_CASE("OU smoothing preconditions") {
  const AtomicMeasure two_d({VectorXd::Zero(2), VectorXd::Ones(2)}, {0.5, 0.5});
  CHECK_THROWS_AS(ou_smooth(two_d, 0.1, 64), PreconditionError);
  CHECK_THROWS_AS(ou_smooth_grid(two_atoms(), 0.0, 64), PreconditionError);
  CHECK_THROWS_AS(ou_w2_squared(two_atoms(), -1.0), PreconditionError);
  CHECK_THROWS_AS(AtomicMeasure({VectorXd::Zero(1)}, {0.9}), PreconditionError);
  CHECK_THROWS_AS(AtomicMeasure({VectorXd::Zero(1), VectorXd::Zero(2)}, {0.5, 0.5}), PreconditionError);
  CHECK_THROWS_AS(AtomicMeasure({VectorXd::Zero(1), VectorXd::Ones(1)}, {1.5, -0.5}), PreconditionError);
}

TEST_CASE("ou_w2_squared") {
  const auto single = AtomicMeasure({VectorXd::Constant(1, 2.0)}, {1.0});
  for (double delta : {0.01, 0.5}) {
    const double m = (1 - std::exp(-delta)) * 2, s = std::sqrt(1 - std::exp(-2 * delta));
    CHECK(ou_w2_squared(single, delta) == doctest::Approx(m * m + s * s).epsilon(1e-12));
  }
  const AtomicMeasure three({VectorXd::Constant(1, -1.5), VectorXd::Constant(1, 0.2), VectorXd::Constant(1, 2.0)},
                            {0.25, 0.5, 0.25});
  for (double delta : {0.05, 0.3}) {
    const double oracle = w2_sq_grid_vs_atoms(ou_smooth_grid(three, delta, 8192), three);
    CHECK(ou_w2_squared(three, delta) == doctest::Approx(oracle).epsilon(1e-2));
  }
}

TEST_CASE("estimate_K") {
  const auto pot = make_objective<double>(MatrixXd::Identity(1, 1), VectorXd::Zero(1), Variant::kPotentialOnly, 0.0);
  for (double gamma : {1.0, 0.5}) {
    const auto traj = run_forward(Gaussian::scalar(1, 1), pot, gamma, 3, std::vector<double>(3, 0.0));
    CHECK(estimate_K(traj) == doctest::Approx(std::log(1 + gamma) / gamma).epsilon(1e-12));
  }
  auto ident = exact_chain(3);
  for (auto& t : ident.transports) t = Affine{MatrixXd::Identity(1, 1), VectorXd::Zero(1)};
  CHECK(estimate_K(ident) == 0.0);

  std::mt19937_64 rng(5);
  const auto grid_traj = run_forward(testing::random_mixture_grid(rng, 512), standard_normal_objective<double>(1), 1.0,
                                     3, std::vector<double>(3, 0.0));
  const double k = estimate_K(grid_traj);
  CHECK(k >= 0);
  for (const auto& t : grid_traj.transports) CHECK(lipschitz(invert_map(t)) <= std::exp(grid_traj.gamma * k) + 1e-12);
  auto copy = grid_traj;
  CHECK(estimate_K(copy) == k);
}

TEST_CASE("exact runs decay strictly in W2") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const auto spec = make_objective<double>(testing::random_spd(rng, d, 0.3, 1.0), testing::random_vector(rng, d),
                                             Variant::kKL, 1.0);
    const auto traj = run_forward(testing::random_gaussian(rng, d), spec, 1.2, 8, std::vector<double>(8, 0.0));
    const auto q = global_minimizer(spec);
    for (int n = 0; n < 8; ++n) CHECK(w2_bw(traj.measures[n + 1], q) < w2_bw(traj.measures[n], q));
  }
  const auto spec = standard_normal_objective<double>(1);
  const auto traj = run_forward(from_mixture<double>(std::vector<double>{0.4, 0.6}, std::vector<double>{-2, 1.5},
                                                     std::vector<double>{0.5, 0.7}, 1024),
                                spec, 1.0, 6, std::vector<double>(6, 0.0));
  const auto q = target_measure(traj);
  for (int n = 0; n < 6; ++n) CHECK(w2(traj.measures[n + 1], q) < w2(traj.measures[n], q));
}

TEST_CASE("family names") {
  CHECK(family_from_string(to_string(Family::kGrid)) == Family::kGrid);
  CHECK(family_from_string(to_string(Family::kGaussian)) == Family::kGaussian);
  CHECK_THROWS_AS(family_from_string("particle"), PreconditionError);
}
