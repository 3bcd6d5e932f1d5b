#include "homog/krylov.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace homog;

namespace {

  constexpr Real inf = std::numeric_limits<Real>::infinity();

  auto dense(const Eigen::MatrixXd & a) {
    return [a](const Vector & x, Vector & y) {
      Eigen::Map<const Eigen::VectorXd> xm(x.data(), static_cast<Eigen::Index>(x.size()));
      Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) = a * xm;
    };
  }

  Eigen::MatrixXd random_spd(Index n, std::uint64_t seed, Real shift) {
    const auto v = test::random_vector(static_cast<std::size_t>(n * n), seed);
    const Eigen::MatrixXd m = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
    return m * m.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
  }

  Real norm(const Vector & v) { return euclid_norm(v); }

  TEST(CGSteihaug, ZeroRightHandSide) {
    const auto r = cg_steihaug(dense(Eigen::MatrixXd::Identity(4, 4)), Vector(4, 0.), 1., {});
    EXPECT_EQ(r.termination, Termination::Converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(norm(r.p), 0.);
  }

  TEST(CGSteihaug, IdentityInterior) {
    const Vector b{1., -2., 0.5};
    const auto r = cg_steihaug(dense(Eigen::MatrixXd::Identity(3, 3)), b, 10., {});
    EXPECT_EQ(r.termination, Termination::Converged);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(r.p[i], b[i], 1e-15);
  }

  TEST(CGSteihaug, NegativeCurvatureGoesToBoundary) {
    const Vector b{3., 4.};
    const auto r = cg_steihaug(dense(-Eigen::MatrixXd::Identity(2, 2)), b, 1., {});
    EXPECT_EQ(r.termination, Termination::NegativeCurvature);
    EXPECT_NEAR(r.p[0], 0.6, 1e-15);
    EXPECT_NEAR(r.p[1], 0.8, 1e-15);
  }

  TEST(CGSteihaug, NegativeCurvatureWithoutRadiusStops) {
    const auto r = cg_steihaug(dense(-Eigen::MatrixXd::Identity(2, 2)), Vector{1., 1.}, inf, {});
    EXPECT_EQ(r.termination, Termination::NegativeCurvature);
    EXPECT_EQ(norm(r.p), 0.);
  }

  TEST(CGSteihaug, RandomSPDMatchesDenseSolve) {
    for (Index n : {3, 10, 25, 50}) {
      const Eigen::MatrixXd a = random_spd(n, static_cast<std::uint64_t>(n), 0.5 * static_cast<Real>(n));
      const Vector b = test::random_vector(static_cast<std::size_t>(n), 100 + static_cast<std::uint64_t>(n));
      KrylovConfig cfg;
      cfg.eta_cg = 1e-12;
      cfg.max_iter = 10 * n;
      const auto r = cg_steihaug(dense(a), b, inf, cfg);
      const Eigen::VectorXd ref = a.llt().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), n));
      const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(r.p.data(), n);
      EXPECT_EQ(r.termination, Termination::Converged);
      EXPECT_LT((p - ref).norm() / ref.norm(), 1e-8) << "n = " << n;
    }
  }

  TEST(CGSteihaug, ModelDecreasesAndRadiusHolds) {
    const Index n = 40;
    const Eigen::MatrixXd a = random_spd(n, 7, 0.1);
    const Vector b = test::random_vector(n, 8);
    const Eigen::Map<const Eigen::VectorXd> bm(b.data(), n);
    const Real rfree = a.llt().solve(bm).norm();
    for (const Real radius : {0.01 * rfree, 0.3 * rfree, 0.9 * rfree, 2. * rfree}) {
      KrylovConfig cfg;
      cfg.eta_cg = 1e-10;
      cfg.max_iter = 200;
      const auto r = cg_steihaug(dense(a), b, radius, cfg);
      Real last = 0.;
      for (const auto & it : r.trace) {
        EXPECT_LE(it.model, last + 1e-14 * std::abs(last));
        last = it.model;
      }
      const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(r.p.data(), n);
      EXPECT_NEAR(r.model, -bm.dot(p) + 0.5 * p.dot(a * p), 1e-10 * std::abs(r.model));
      EXPECT_LE(p.norm(), radius * (1. + 1e-10));
      if (r.termination == Termination::BoundaryHit) {
        EXPECT_NEAR(p.norm(), radius, 1e-10 * radius);
      }
      if (radius < rfree) {
        EXPECT_EQ(r.termination, Termination::BoundaryHit);
      }
    }
  }

  TEST(CGSteihaug, IndefiniteStaysInsideRadius) {
    const Index n = 30;
    Eigen::MatrixXd a = random_spd(n, 9, 0.);
    a -= 5. * static_cast<Real>(n) * Eigen::MatrixXd::Identity(n, n) * 0.2;
    const Vector b = test::random_vector(n, 10);
    const auto r = cg_steihaug(dense(a), b, 0.7, {});
    EXPECT_LE(norm(r.p), 0.7 * (1. + 1e-10));
    EXPECT_LT(r.model, 0.);
  }

  TEST(CGSteihaug, WithoutResetsMatchesTextbookCG) {
    const Index n = 20;
    const Eigen::MatrixXd a = random_spd(n, 11, 1.);
    const Vector b = test::random_vector(n, 12);
    KrylovConfig cfg;
    cfg.reset_threshold = inf;
    cfg.eta_cg = 1e-30;
    cfg.max_iter = 6;
    const auto r = cg_steihaug(dense(a), b, inf, cfg);
    ASSERT_EQ(r.termination, Termination::MaxIter);
    EXPECT_EQ(r.resets, 0);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd res = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
    Eigen::VectorXd d = res;
    for (int j = 0; j < 6; ++j) {
      const Eigen::VectorXd ad = a * d;
      const Real alpha = res.squaredNorm() / d.dot(ad);
      x += alpha * d;
      const Eigen::VectorXd rn = res - alpha * ad;
      d = rn + (rn.squaredNorm() / res.squaredNorm()) * d;
      res = rn;
      EXPECT_NEAR(r.trace[static_cast<std::size_t>(j)].residual, res.norm(), 1e-12 * res.norm());
    }
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(r.p.data(), n);
    EXPECT_LT((p - x).norm() / x.norm(), 1e-13);
  }

  TEST(CGSteihaug, ResetsStillConverge) {
    // tight threshold forces resets; the true-residual restart keeps convergence
    const Index n = 30;
    const Eigen::MatrixXd a = random_spd(n, 13, 1e-3);
    const Vector b = test::random_vector(n, 14);
    KrylovConfig cfg;
    cfg.reset_threshold = 0.11;
    cfg.eta_cg = 1e-8;
    cfg.max_iter = 2000;
    const auto r = cg_steihaug(dense(a), b, inf, cfg);
    EXPECT_EQ(r.termination, Termination::Converged);
    const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(r.p.data(), n);
    const Eigen::Map<const Eigen::VectorXd> bm(b.data(), n);
    EXPECT_LT((a * p - bm).norm(), 1e-7 * bm.norm());
  }

  TEST(KrylovConfig, Validation) {
    KrylovConfig c;
    c.reset_threshold = 0.05;
    EXPECT_THROW(c.validate(), KrylovError);
    c.reset_threshold = inf;
    EXPECT_NO_THROW(c.validate());
    c.eta_cg = 0.;
    EXPECT_THROW(c.validate(), KrylovError);
    EXPECT_EQ(KrylovConfig{}.iteration_cap(100), 100);
    EXPECT_EQ(KrylovConfig{}.iteration_cap(10000), 1000);
    EXPECT_THROW(cg_steihaug(dense(Eigen::MatrixXd::Identity(1, 1)), Vector{1.}, 0., {}), KrylovError);
  }

}  // namespace
