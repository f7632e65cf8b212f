#include "lntune/hypersphere.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

namespace lntune {
namespace {

using testing::random_unit;
using testing::random_vector;

TEST(L2Normalize, ThreeFourFive) {
  Eigen::VectorXd v(2);
  v << 3, 4;
  const auto u = l2_normalize(v);
  EXPECT_NEAR(u[0], 0.6, 1e-15);
  EXPECT_NEAR(u[1], 0.8, 1e-15);
}

TEST(L2Normalize, UnitInputIsFixedPoint) {
  Eigen::VectorXd v = Eigen::VectorXd::Unit(3, 0);
  const auto u = l2_normalize(v);
  EXPECT_EQ(u.values(), v);
}

TEST(L2Normalize, RandomHighDimensional) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd v = random_vector(rng, 1024) * rng.uniform(0.01, 100.0);
    const auto u = l2_normalize(v);
    EXPECT_LT(std::abs(u.values().norm() - 1.0), 1e-6);
    EXPECT_NEAR(u.values().dot(v) / v.norm(), 1.0, 1e-6);
  }
}

TEST(L2Normalize, Idempotent) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto once = l2_normalize(random_vector(rng, 17));
    const auto twice = l2_normalize(once.values());
    EXPECT_LT((once.values() - twice.values()).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(L2Normalize, ZeroVectorThrows) {
  EXPECT_THROW(l2_normalize(Eigen::VectorXd::Zero(4)), ZeroVector);
  EXPECT_THROW(l2_normalize(Eigen::VectorXd::Constant(4, 1e-14)), ZeroVector);
}

TEST(Slerp, OrthogonalMidpoint) {
  const auto e1 = l2_normalize(Eigen::VectorXd::Unit(3, 0));
  const auto e2 = l2_normalize(Eigen::VectorXd::Unit(3, 1));
  const auto m = slerp(e1, e2, 0.5);
  EXPECT_NEAR(m[0], std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_NEAR(m[1], std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_NEAR(m[2], 0.0, 1e-12);
}

TEST(Slerp, EndpointsAndAngles) {
  Rng rng(13);
  for (int pair = 0; pair < 100; ++pair) {
    const auto a = l2_normalize(random_unit(rng, 32));
    const auto b = l2_normalize(random_unit(rng, 32));
    EXPECT_LT((slerp(a, b, 0.0).values() - a.values()).norm(), 1e-5);
    EXPECT_LT((slerp(a, b, 1.0).values() - b.values()).norm(), 1e-5);
    const double theta = angle_between(a.values(), b.values());
    double prev = -1.0;
    for (int k = 1; k <= 9; ++k) {
      const double t = 0.1 * k;
      const auto out = slerp(a, b, t);
      const double ang = angle_between(a.values(), out.values());
      EXPECT_NEAR(ang, t * theta, 1e-4);
      EXPECT_GE(ang, prev);
      prev = ang;
      // stays in span{a, b}
      Eigen::MatrixXd basis(32, 2);
      basis << a.values(), b.values();
      const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(out.values());
      EXPECT_LT((basis * coef - out.values()).norm(), 1e-9);
    }
  }
}

TEST(Slerp, Symmetry) {
  Rng rng(14);
  for (int pair = 0; pair < 50; ++pair) {
    const auto a = l2_normalize(random_unit(rng, 8));
    const auto b = l2_normalize(random_unit(rng, 8));
    const double t = rng.uniform();
    EXPECT_LT((slerp(a, b, t).values() - slerp(b, a, 1.0 - t).values()).norm(), 1e-5);
  }
}

TEST(Slerp, NearParallelFallsBackToLinear) {
  Rng rng(15);
  const Eigen::VectorXd a = random_unit(rng, 16);
  Eigen::VectorXd b = a + 1e-7 * random_unit(rng, 16);
  b.normalize();
  Eigen::VectorXd out(16);
  EXPECT_EQ(slerp_into(a, b, 0.3, out), SlerpRegime::Linear);
  EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  const auto same = slerp(l2_normalize(a), l2_normalize(a), 0.7);
  EXPECT_LT((same.values() - a).norm(), 1e-12);
}

TEST(Slerp, AntipodalStaysOnSphereAndCounts) {
  Rng rng(16);
  const Eigen::VectorXd a = random_unit(rng, 8);
  const Eigen::VectorXd b = -a;
  const auto before = slerp_antipodal_counter().load();
  Eigen::VectorXd out(8);
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    EXPECT_EQ(slerp_into(a, b, t, out), SlerpRegime::Antipodal);
    EXPECT_NEAR(out.norm(), 1.0, 1e-12);
    EXPECT_TRUE(out.allFinite());
  }
  EXPECT_LT((out - b).norm(), 1e-5);
  EXPECT_EQ(slerp_antipodal_counter().load(), before + 5);
}

TEST(SlerpBackward, MatchesCentralDifferences) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::VectorXd a = random_unit(rng, 6), b = random_unit(rng, 6), g = random_vector(rng, 6);
    const double t = rng.uniform(0.05, 0.95);
    Eigen::VectorXd ga = Eigen::VectorXd::Zero(6), gb = Eigen::VectorXd::Zero(6);
    slerp_backward(a, b, t, g, ga, gb);
    const double h = 1e-6;
    Eigen::VectorXd out(6);
    auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
      slerp_into(x, y, t, out);
      return g.dot(out);
    };
    for (int i = 0; i < 6; ++i) {
      Eigen::VectorXd ap = a, am = a, bp = b, bm = b;
      ap[i] += h;
      am[i] -= h;
      bp[i] += h;
      bm[i] -= h;
      EXPECT_NEAR((f(ap, b) - f(am, b)) / (2 * h), ga[i], 1e-6 * (1 + std::abs(ga[i])));
      EXPECT_NEAR((f(a, bp) - f(a, bm)) / (2 * h), gb[i], 1e-6 * (1 + std::abs(gb[i])));
    }
  }
}

TEST(PairwiseSqDists, IdenticalRowsAreZero) {
  Eigen::MatrixXd z(3, 4);
  for (int r = 0; r < 3; ++r) z.row(r) << 0.5, 0.5, 0.5, 0.5;
  EXPECT_EQ(pairwise_sq_dists(z).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PairwiseSqDists, AntipodalIsFour) {
  Eigen::MatrixXd z(2, 3);
  z << 1, 0, 0, -1, 0, 0;
  const auto d = pairwise_sq_dists(z);
  EXPECT_DOUBLE_EQ(d(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(d(1, 0), 4.0);
  EXPECT_DOUBLE_EQ(d(0, 0), 0.0);
}

TEST(PairwiseSqDists, MatchesDoubleLoop) {
  Rng rng(18);
  const Eigen::MatrixXd z = testing::random_unit_rows(rng, 8, 12);
  const FeatureBatch batch(z, std::vector<int>(8, 0));
  const auto d = pairwise_sq_dists(batch);
  for (int x = 0; x < 8; ++x)
    for (int y = 0; y < 8; ++y) {
      EXPECT_NEAR(d(x, y), (z.row(x) - z.row(y)).squaredNorm(), 1e-6);
      EXPECT_NEAR(d(x, y), x == y ? 0.0 : 2.0 - 2.0 * z.row(x).dot(z.row(y)), 1e-5);
      EXPECT_EQ(d(x, y), d(y, x));
      EXPECT_GE(d(x, y), 0.0);
      EXPECT_LE(d(x, y), 4.0);
    }
}

TEST(FeatureBatch, RejectsNonUnitRows) {
  Eigen::MatrixXd z(2, 2);
  z << 1, 0, 0, 2;
  EXPECT_THROW(FeatureBatch(z, {0, 1}), InvalidFeature);
  EXPECT_THROW(FeatureBatch(Eigen::MatrixXd::Identity(2, 2), {0}), ShapeMismatch);
  EXPECT_THROW(FeatureBatch(Eigen::MatrixXd::Identity(2, 2), {0, 2}), InvalidFeature);
}

}  // namespace
}  // namespace lntune
