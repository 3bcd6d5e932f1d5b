#include "homog/spring1d.hpp"

#include <gtest/gtest.h>

using namespace homog;
using namespace homog::spring;

namespace {

  SpringSystem ring(Real alpha) { return SpringSystem{1., alpha, 0.1, 0.11}; }

  TEST(Spring, PostPeakEigenvalues) {
    for (const Real alpha : {1., 0.25, -0.5, -1., -2.}) {
      const auto s = ring(alpha);
      Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(post_peak_stiffness(s)).eigenvalues();
      Eigen::Vector3d ref{0., 3. * s.k, (2. * alpha + 1.) * s.k};
      std::sort(ref.data(), ref.data() + 3);
      EXPECT_LT((ev - ref).norm(), 1e-14) << "alpha = " << alpha;
    }
    const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(post_peak_stiffness(ring(-0.5))).eigenvalues();
    EXPECT_NEAR(ev(0), 0., 1e-15);
    EXPECT_NEAR(ev(1), 0., 1e-15);
  }

  TEST(Spring, ForceAndStiffnessMatchFiniteDifferences) {
    const Real h = 1e-6;
    for (const Real alpha : {1., -0.5, -1.}) {
      const auto s = ring(alpha);
      for (const Vec2 x : {Vec2{0.05, 0.12}, Vec2{0.15, 0.03}, Vec2{0.17, -0.02}}) {
        const auto e = spring_eval(s, x);
        for (int j = 0; j < 2; ++j) {
          Vec2 xp = x, xm = x;
          xp(j) += h;
          xm(j) -= h;
          const Real fd = (spring_eval(s, xp).energy - spring_eval(s, xm).energy) / (2. * h);
          EXPECT_NEAR(e.force(j), fd, 1e-8);
          const Vec2 kfd = (spring_eval(s, xp).force - spring_eval(s, xm).force) / (2. * h);
          EXPECT_LT((e.stiffness.col(j) - kfd).norm(), 1e-8);
        }
      }
    }
  }

  TEST(Spring, RuptureAndForceContinuity) {
    const auto s = ring(-1.);
    EXPECT_DOUBLE_EQ(s.rupture(), 0.2);
    EXPECT_NEAR(s.damage_spring(0.2 - 1e-12)[1], 0., 1e-11);
    EXPECT_EQ(s.damage_spring(0.3)[1], 0.);
    EXPECT_NEAR(s.damage_spring(0.1 + 1e-12)[1], s.damage_spring(0.1)[1], 1e-11);
    EXPECT_TRUE(std::isinf(ring(1.).rupture()));
  }

  TEST(Spring, FaiefExactInsideOnePiece) {
    const auto s = ring(-1.);
    const Vec2 x{0.12, 0.05}, p{0.03, -0.01};
    EXPECT_NEAR(faief(s, x, p), exact_delta(s, x, p), 1e-16);
  }

  TEST(Spring, ConvexCaseAllMethodsAgree) {
    const auto s = ring(1.);
    for (const Vec2 start : {Vec2{0.11, 0.11}, Vec2{0.3, 0.}, Vec2{-0.1, 0.2}}) {
      const auto n = spring_solve(s, start, Method::NewtonCG);
      const auto a = spring_solve(s, start, Method::StandardTR);
      const auto b = spring_solve(s, start, Method::ModifiedTR);
      ASSERT_TRUE(n.converged && a.converged && b.converged);
      EXPECT_LT((n.x - Vec2(0.11, 0.11)).norm(), 1e-10);
      EXPECT_LT((a.x - n.x).norm(), 1e-10);
      EXPECT_LT((b.x - n.x).norm(), 1e-10);
    }
  }

  TEST(Spring, SofteningCaseTrustRegionsAgreeNewtonFails) {
    const auto s = ring(-1.);
    const Vec2 start{0.11, 0.11};
    const auto n = spring_solve(s, start, Method::NewtonCG);
    const auto a = spring_solve(s, start, Method::StandardTR);
    const auto b = spring_solve(s, start, Method::ModifiedTR);
    EXPECT_FALSE(n.converged);
    ASSERT_TRUE(a.converged && b.converged);
    EXPECT_LT((a.x - b.x).norm(), 1e-8);
    // fully broken damage spring, the intact springs unloaded
    EXPECT_LT((b.x - Vec2(0.33, 0.)).norm(), 1e-10);
    EXPECT_LT(spring_eval(s, b.x).energy, spring_eval(s, start).energy);
    // the standard and modified ratios see the same steps
    ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
      EXPECT_LT((a.trajectory[i].x - b.trajectory[i].x).norm(), 1e-10);
      EXPECT_EQ(a.trajectory[i].accepted, b.trajectory[i].accepted);
    }
  }

  TEST(Spring, MetaStableCaseEndsAtZeroCurvatureMinimiser) {
    const auto s = ring(-0.5);
    const auto b = spring_solve(s, Vec2{0.11, 0.11}, Method::ModifiedTR);
    ASSERT_TRUE(b.converged);
    EXPECT_LT(spring_eval(s, b.x).force.norm(), 1e-12);
    EXPECT_LT((b.x - Vec2(0.33, 0.)).norm(), 1e-10);
  }

  TEST(Spring, AcceptedStepsNeverRaiseEnergy) {
    for (const Real alpha : {1., -0.5, -1.}) {
      for (auto m : {Method::StandardTR, Method::ModifiedTR}) {
        const auto r = spring_solve(ring(alpha), Vec2{0.11, 0.11}, m);
        Real last = r.trajectory.front().energy;
        for (const auto & it : r.trajectory) {
          if (!it.accepted) continue;
          EXPECT_LE(it.energy, last + 1e-15);
          last = it.energy;
        }
      }
    }
  }

  TEST(Spring, LandscapeShape) {
    const Real h = 1e-3;
    auto second = [&](const SpringSystem & s, Real x) {
      return (landscape(s, x + h) - 2. * landscape(s, x) + landscape(s, x - h)) / (h * h);
    };
    const auto convex = ring(1.);
    for (Real x = 0.; x <= 0.4; x += 0.01) EXPECT_GT(second(convex, x), 0.) << x;
    for (const Real alpha : {-0.5, -1.}) {
      const auto s = ring(alpha);
      // curvature 1.5 k before the onset at x0 = 0.1, (alpha + 1/2) k after it
      EXPECT_NEAR(second(s, 0.05), 1.5, 1e-8);
      EXPECT_NEAR(second(s, 0.15), alpha + 0.5, 1e-8);
      EXPECT_LE(second(s, 0.15), 1e-9);
    }
  }

}  // namespace
