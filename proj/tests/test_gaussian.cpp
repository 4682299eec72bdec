#include "jkolab/oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace jkolab;

namespace {

MatrixXd diag(std::initializer_list<double> d) {
  VectorXd v(static_cast<Eigen::Index>(d.size()));
  Eigen::Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

MatrixXd rotation(double theta) {
  MatrixXd r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

}  // namespace

TEST_CASE("covariance validation") {
  CHECK_THROWS_AS(Gaussian(VectorXd::Zero(2), (MatrixXd(2, 2) << 1, 0.5, 0, 1).finished()), PreconditionError);
  CHECK_THROWS_AS(Gaussian(VectorXd::Zero(2), diag({1, -1})), PreconditionError);
  CHECK_THROWS_AS(Gaussian(VectorXd::Zero(3), diag({1, 1})), PreconditionError);
  CHECK_NOTHROW(Gaussian::point_mass(VectorXd::Ones(2)));
  CHECK_FALSE(Gaussian::point_mass(VectorXd::Ones(2)).is_nondegenerate());
}

TEST_CASE("w2_bw examples") {
  std::mt19937_64 rng(1);
  const auto g = testing::random_gaussian(rng, 3);
  CHECK(w2_bw(g, g) < 1e-7);
  const VectorXd m1 = (VectorXd(2) << 1, 2).finished(), m2 = (VectorXd(2) << -1, 0.5).finished();
  CHECK(w2_bw(Gaussian(m1, MatrixXd::Identity(2, 2)), Gaussian(m2, MatrixXd::Identity(2, 2))) ==
        doctest::Approx((m1 - m2).norm()).epsilon(1e-12));
  CHECK_THROWS_AS(w2_bw(g, Gaussian::scalar(0, 1)), PreconditionError);
}

TEST_CASE("w2_bw on rotated covariances") {
  const MatrixXd s1 = diag({1, 4});
  const MatrixXd r = rotation(M_PI / 4);
  const Gaussian g1(VectorXd::Zero(2), s1), g2(VectorXd::Zero(2), r * s1 * r.transpose());
  // Independent scipy sqrtm evaluation of the closed form.
  CHECK(w2_bw(g1, g2) == doctest::Approx(0.9719129908909462).epsilon(1e-10));
  // Samples of g1 paired with their images under the closed-form OT map,
  // built here from eigendecompositions. A monotone affine image keeps the
  // identity pairing optimal, so the assignment cost is a plain sample mean.
  const Eigen::SelfAdjointEigenSolver<MatrixXd> e1(s1);
  const MatrixXd r1 = e1.eigenvectors() * e1.eigenvalues().cwiseSqrt().asDiagonal() * e1.eigenvectors().transpose();
  const MatrixXd r1inv = r1.inverse();
  const Eigen::SelfAdjointEigenSolver<MatrixXd> em(r1 * g2.cov() * r1);
  const MatrixXd mid = em.eigenvectors() * em.eigenvalues().cwiseSqrt().asDiagonal() * em.eigenvectors().transpose();
  const MatrixXd a = r1inv * mid * r1inv;
  // Whitened draws: sample mean and covariance of xs equal those of g1 exactly.
  std::mt19937_64 rng(2);
  MatrixXd z(2, 2000);
  for (Eigen::Index i = 0; i < z.cols(); ++i) z.col(i) = testing::random_vector(rng, 2);
  z.colwise() -= z.rowwise().mean();
  const MatrixXd white = Eigen::LLT<MatrixXd>(z * z.transpose() / 2000.0).matrixL().solve(z);
  std::vector<VectorXd> xs;
  for (Eigen::Index i = 0; i < z.cols(); ++i) xs.push_back(r1 * white.col(i));
  std::vector<VectorXd> ys;
  for (const auto& x : xs) ys.push_back(a * x);
  const double est = oracles::assignment_w2(xs, ys);
  CHECK(std::abs(est - w2_bw(g1, g2)) <= 0.02 * w2_bw(g1, g2));
  CHECK(est == doctest::Approx(w2_bw(g1, g2)).epsilon(1e-8));
}

TEST_CASE("BW triangle inequality on random triples") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const auto a = testing::random_gaussian(rng, d), b = testing::random_gaussian(rng, d),
               c = testing::random_gaussian(rng, d);
    CHECK(w2_bw(a, c) <= w2_bw(a, b) + w2_bw(b, c) + 1e-9);
    CHECK(w2_bw(a, b) == doctest::Approx(w2_bw(b, a)).epsilon(1e-9));
  }
}

TEST_CASE("degenerate endpoint") {
  std::mt19937_64 rng(4);
  const auto g = testing::random_gaussian(rng, 3);
  const VectorXd m2 = testing::random_vector(rng, 3);
  const double expect = std::sqrt((g.mean() - m2).squaredNorm() + g.cov().trace());
  CHECK(w2_bw(g, Gaussian::point_mass(m2)) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("ot_map_bw") {
  std::mt19937_64 rng(5);
  const auto g = testing::random_gaussian(rng, 3);
  const auto id = ot_map_bw(g, g);
  CHECK((id.linear - MatrixXd::Identity(3, 3)).norm() < 1e-10);
  CHECK(id.offset.norm() < 1e-10);
  const auto t1 = ot_map_bw(Gaussian::scalar(1, 4), Gaussian::scalar(-1, 9));
  CHECK(t1.linear(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(t1.offset(0) == doctest::Approx(-2.5).epsilon(1e-14));
  CHECK_THROWS_AS(ot_map_bw(Gaussian::point_mass(VectorXd::Zero(1)), Gaussian::scalar(0, 1)), PreconditionError);

  for (int t = 0; t < 50; ++t) {
    const auto a = testing::random_gaussian(rng, 3), b = testing::random_gaussian(rng, 3);
    const auto tm = ot_map_bw(a, b);
    const auto pushed = pushforward(a, tm);
    CHECK((pushed.mean() - b.mean()).norm() < 1e-10);
    CHECK((pushed.cov() - b.cov()).norm() < 1e-10);
    const auto round = compose(ot_map_bw(b, a), tm);
    CHECK((round.linear - MatrixXd::Identity(3, 3)).norm() < 1e-10);
    CHECK(round.offset.norm() < 1e-10);
    const MatrixXd e = tm.linear - MatrixXd::Identity(3, 3);
    const double cost = (tm.offset + e * a.mean()).squaredNorm() + (e * a.cov() * e.transpose()).trace();
    CHECK(cost == doctest::Approx(w2_bw_squared(a, b)).epsilon(1e-10));
    CHECK((tm.linear - tm.linear.transpose()).norm() < 1e-10);
    CHECK(min_eigenvalue(tm.linear) > 0);
  }
}

TEST_CASE("affine pushforward parameters") {
  std::mt19937_64 rng(6);
  const auto g = testing::random_gaussian(rng, 2);
  Affine t;
  t.linear = testing::random_spd(rng, 2);
  t.offset = testing::random_vector(rng, 2);
  const auto p = pushforward(g, t);
  CHECK((p.mean() - (t.linear * g.mean() + t.offset)).norm() < 1e-14);
  CHECK((p.cov() - t.linear * g.cov() * t.linear.transpose()).norm() < 1e-12);
}

TEST_CASE("kl_gaussian") {
  const auto spec1 = standard_normal_objective<double>(1);
  CHECK(kl_gaussian(Gaussian::scalar(0, 1), spec1) == doctest::Approx(0.0));
  CHECK(kl_gaussian(Gaussian::scalar(1, 1), spec1) == doctest::Approx(0.5).epsilon(1e-14));
  const auto spec2 = standard_normal_objective<double>(2);
  CHECK(kl_gaussian(Gaussian(VectorXd::Zero(2), diag({4, 1})), spec2) ==
        doctest::Approx(0.8068528194400547).epsilon(1e-14));
  CHECK_THROWS_AS(kl_gaussian(Gaussian::point_mass(VectorXd::Zero(1)), spec1), PreconditionError);
}

TEST_CASE("subgradient field") {
  const auto spec = standard_normal_objective<double>(1);
  const auto zero = subgradient_field(Gaussian::scalar(0, 1), spec);
  CHECK(zero.linear.norm() < 1e-15);
  CHECK(zero.offset.norm() < 1e-15);
  const auto f = subgradient_field(Gaussian::scalar(1, 1), spec);
  CHECK(f.linear(0, 0) == doctest::Approx(0.0));
  CHECK(f.offset(0) == doctest::Approx(1.0));
}

TEST_CASE("subgradient field matches finite differences") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 1 + t % 3;
    const auto g = testing::random_gaussian(rng, d);
    const auto spec = make_objective<double>(testing::random_spd(rng, d, 0.2, 1.0), testing::random_vector(rng, d),
                                             Variant::kKL, 1.0);
    Affine v;
    v.linear = testing::random_vector(rng, d * d).reshaped(d, d);
    v.offset = testing::random_vector(rng, d);
    const double exact = field_inner(subgradient_field(g, spec), v, g);
    const double e2 = std::abs(oracles::fd_directional(spec, g, v, 1e-2) - exact);
    const double e3 = std::abs(oracles::fd_directional(spec, g, v, 1e-3) - exact);
    CHECK(e3 <= 1e-3 * (1 + std::abs(exact)));
    CHECK(e3 <= e2 + 1e-9);
  }
}

TEST_CASE("field norms") {
  std::mt19937_64 rng(8);
  const auto g = testing::random_gaussian(rng, 3);
  Affine f;
  f.linear = MatrixXd::Zero(3, 3);
  f.offset = VectorXd::Zero(3);
  CHECK(field_l2_norm(f, g) == 0.0);
  f.offset = (VectorXd(3) << 1, 2, 2).finished();
  CHECK(field_l2_norm(f, g) == doctest::Approx(3.0).epsilon(1e-14));
  for (Eigen::Index d : {1, 2, 3, 8}) {
    Affine id;
    id.linear = MatrixXd::Identity(d, d);
    id.offset = VectorXd::Zero(d);
    CHECK(field_l2_norm(id, Gaussian(VectorXd::Zero(d), MatrixXd::Identity(d, d))) ==
          doctest::Approx(std::sqrt(static_cast<double>(d))).epsilon(1e-14));
  }
}
