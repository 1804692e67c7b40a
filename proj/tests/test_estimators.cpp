#include "fedzen/estimators.hpp"
#include "fedzen/problems.hpp"
#include "fedzen/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fedzen;

namespace {

Oracle scalar(double (*f)(double)) {
  return Oracle(1, [f](const Vector& x) { return f(x(0)); });
}

ProbeResult probe1(Oracle& o, double x, double mu) {
  return probe_batch(o, Vector::Constant(1, x), canonical_basis(1), mu);
}

}  // namespace

TEST(Curvature, QuarticAtOne) {
  Oracle o = scalar([](double t) { return t * t * t * t; });
  EXPECT_NEAR(directional_curvature(probe1(o, 1.0, 0.1), 0), 12.02, 1e-12);
}

TEST(Curvature, ExactOnQuadratics) {
  Matrix a(3, 3);
  a << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  ProblemSpec q = make_quadratic(a, Vector::Zero(3));
  Oracle o = q.make_oracle();
  RngStream rng(1);
  const DirectionSet u = stiefel_sample(3, 3, rng);
  ProbeResult p = probe_batch(o, Eigen::Vector3d(0.3, -0.2, 0.1), u, 0.5);
  for (Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(directional_curvature(p, j), quadratic_form(a, u.direction(j)), 1e-12);
  }
}

TEST(Curvature, ConstantIsZero) {
  Oracle o = scalar([](double) { return 3.0; });
  EXPECT_EQ(directional_curvature(probe1(o, 0.4, 0.1), 0), 0.0);
}

TEST(RankOne, CanonicalDirection) {
  HessianEstimate h = HessianEstimate::zero(2);
  hessian_rank_one_update(h, Eigen::Vector2d(1, 0), 2.0);
  EXPECT_EQ(h.H(0, 0), 2.0);
  EXPECT_EQ(h.H(1, 1), 0.0);
  EXPECT_EQ(h.H(0, 1), 0.0);
  EXPECT_EQ(h.updates_applied, 1u);
}

TEST(RankOne, DiagonalDirection) {
  HessianEstimate h = HessianEstimate::zero(2);
  const double s = 1.0 / std::sqrt(2.0);
  hessian_rank_one_update(h, Eigen::Vector2d(s, s), 3.0);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) EXPECT_NEAR(h.H(i, j), 1.5, 1e-15);
}

TEST(RankOne, MatchesCurvatureAndStaysSymmetric) {
  RngStream rng(3);
  HessianEstimate h = HessianEstimate::zero(6);
  for (int t = 0; t < 200; ++t) {
    const Vector u = gaussian_sphere_sample(6, 1, rng).columns.col(0);
    const double c = 5.0 * rng.normal();
    hessian_rank_one_update(h, u, c);
    EXPECT_NEAR(quadratic_form(h.H, u), c, 1e-10 * (1.0 + std::abs(c)));
    EXPECT_EQ(h.H, h.H.transpose());
  }
  EXPECT_EQ(h.updates_applied, 200u);
}

TEST(RankOne, RejectsNonUnitDirection) {
  HessianEstimate h = HessianEstimate::zero(2);
  EXPECT_THROW(hessian_rank_one_update(h, Eigen::Vector2d(1, 1), 1.0), std::invalid_argument);
}

TEST(EstimateHessian, DiagonalQuadraticCanonical) {
  ProblemSpec q = make_quadratic(Eigen::Vector2d(2, 4).asDiagonal().toDenseMatrix(), Vector::Zero(2));
  Oracle o = q.make_oracle();
  auto [h, probe] = estimate_hessian(o, Eigen::Vector2d(0.7, -1.1), canonical_basis(2), 0.3);
  EXPECT_NEAR(h.H(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(h.H(1, 1), 4.0, 1e-12);
  EXPECT_EQ(h.H(0, 1), 0.0);
  EXPECT_EQ(o.eval_count(), 5u);
  ASSERT_TRUE(h.last_center);
}

TEST(EstimateHessian, ExactWarmStartIsFixedPoint) {
  Matrix a(3, 3);
  a << 3, 1, 0, 1, 2, 0, 0, 0, 1;
  ProblemSpec q = make_quadratic(a, Vector::Zero(3));
  Oracle o = q.make_oracle();
  RngStream rng(4);
  HessianEstimate warm{a, 0, std::nullopt};
  auto [h, probe] = estimate_hessian(o, Vector::Zero(3), stiefel_sample(3, 9, rng), 1e-2, warm);
  EXPECT_LE((h.H - a).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_EQ(h.updates_applied, 9u);
}

TEST(EstimateHessian, ConvergesAlmostSurely) {
  RngStream rng(5);
  const Matrix a = random_spd(5, 10.0, rng);
  ProblemSpec q = make_quadratic(a, Vector::Zero(5));
  Oracle o = q.make_oracle();
  auto [h, probe] = estimate_hessian(o, Vector::Zero(5), gaussian_sphere_sample(5, 1500, rng), 1e-3);
  EXPECT_LE((h.H - a).norm(), 1e-6 * a.norm());
}

TEST(Gradient, ExactOnLinear) {
  const Vector c = Eigen::Vector3d(1.5, -2.0, 0.25);
  Oracle o(3, [c](const Vector& x) { return c.dot(x); });
  RngStream rng(6);
  ProbeResult p = probe_batch(o, Eigen::Vector3d(1, 2, 3), stiefel_sample(3, 3, rng), 0.1);
  EXPECT_LE((estimate_gradient(p).g - c).norm(), 1e-12);
}

TEST(Gradient, CubicAtOne) {
  Oracle o = scalar([](double t) { return t * t * t; });
  const GradientEstimate g = estimate_gradient(probe1(o, 1.0, 0.1));
  EXPECT_NEAR(g.g(0), 3.01, 1e-12);
  EXPECT_NEAR(std::abs(g.g(0) - 3.0), gradient_error_bound(1, 6.0, 0.1), 1e-12);
  EXPECT_EQ(o.eval_count(), 3u);
}

TEST(Gradient, ConstantIsZero) {
  Oracle o(2, [](const Vector&) { return -1.0; });
  ProbeResult p = probe_batch(o, Vector::Zero(2), canonical_basis(2), 0.1);
  EXPECT_EQ(estimate_gradient(p).g, Vector::Zero(2));
}

TEST(Gradient, NeedsOrthonormalLeadingFrame) {
  Oracle o(3, [](const Vector& x) { return x.sum(); });
  RngStream rng(7);
  ProbeResult few = probe_batch(o, Vector::Zero(3), stiefel_sample(3, 2, rng), 0.1);
  EXPECT_THROW(estimate_gradient(few), InsufficientDirections);
  ProbeResult loose = probe_batch(o, Vector::Zero(3), gaussian_sphere_sample(3, 3, rng), 0.1);
  EXPECT_THROW(estimate_gradient(loose), InsufficientDirections);
}

TEST(Rates, EtaFormula) {
  EXPECT_DOUBLE_EQ(eta_rate(2), 0.75);
  EXPECT_NEAR(eta_rate(10), 1.0 - 2.0 / 120.0, 1e-15);
  EXPECT_NEAR(eta_rate(1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(eta_rate(5), 0.94286, 1e-5);
}

TEST(Rates, GradientErrorBound) {
  EXPECT_NEAR(gradient_error_bound(1, 6.0, 0.1), 0.01, 1e-15);
  EXPECT_EQ(gradient_error_bound(7, 0.0, 0.5), 0.0);
  EXPECT_NEAR(gradient_error_bound(4, 6.0, 0.01), 4e-4, 1e-18);
}
