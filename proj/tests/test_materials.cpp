#include "homog/materials.hpp"

#include <gtest/gtest.h>

using namespace homog;

namespace {

  Real rel(const Eigen::MatrixXd & a, const Eigen::MatrixXd & b) { return (a - b).norm() / b.norm(); }

  BilinearDamage generic_damage() {
    BilinearDamage m;
    m.young = 2.;
    m.poisson = 0.2;
    m.kappa0 = 1e-3;
    m.alpha = 0.3;
    m.validate();
    return m;
  }

  TEST(DamageMeasure, Examples) {
    EXPECT_EQ(damage_measure(Mandel{-0.3, -0.1, 0.}).kappa, 0.);
    EXPECT_EQ(damage_measure(Mandel{-0.3, -0.1, 0.}).tensile_part, Mandel::Zero());
    const auto m = damage_measure(Mandel{0.2, -0.3, 0.});
    EXPECT_NEAR(m.kappa, 0.2, 1e-15);
    EXPECT_NEAR((m.tensile_part - Mandel{0.2, 0., 0.}).norm(), 0., 1e-15);
    EXPECT_NEAR(damage_measure(Mandel{0.04, 0.04, 0.}).kappa, 0.04 * std::sqrt(2.), 1e-16);
  }

  TEST(DamageMeasure, MatchesEigenDecomposition) {
    const Mandel eps{0.3, -0.1, 0.25};
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(from_mandel(eps));
    Eigen::Matrix2d pos = Eigen::Matrix2d::Zero();
    for (int i = 0; i < 2; ++i)
      if (es.eigenvalues()(i) > 0.)
        pos += es.eigenvalues()(i) * es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    const auto m = damage_measure(eps);
    EXPECT_NEAR(m.kappa, pos.norm(), 1e-15);
    EXPECT_NEAR((m.tensile_part - to_mandel(pos)).norm(), 0., 1e-15);
  }

  TEST(DamageLaw, ExampleValue) {
    BilinearDamage m;
    m.young = 1.;
    m.kappa0 = 0.1;
    m.alpha = -0.5;
    EXPECT_DOUBLE_EQ(m.damage(0.2), 0.25);
    EXPECT_EQ(m.damage(0.05), 0.);
  }

  TEST(DamageLaw, UnloadingFollowsSecant) {
    BilinearDamage m;
    m.young = 1.;
    m.poisson = 0.25;
    m.kappa0 = 0.1;
    m.alpha = -0.5;
    const Mandel eps{0.1, 0., 0.};
    const auto r = evaluate(m, eps, 0.2);
    EXPECT_NEAR(r.damage, 0.25, 1e-15);
    EXPECT_FALSE(r.softening);
    EXPECT_LT(rel(r.tangent, 0.75 * m.stiffness()), 1e-15);
    EXPECT_LT(rel(r.stress, 0.75 * m.stiffness() * eps), 1e-15);
    EXPECT_EQ(r.kappa_trial, 0.2);
  }

  TEST(DamageLaw, ClampedBelowOne) {
    const auto m = generic_damage();
    EXPECT_LE(m.damage(1e3), BilinearDamage::max_damage);
    EXPECT_EQ(m.damage_slope(1e3), 0.);
  }

  Mandel4 fd_tangent(const BilinearDamage & m, const Mandel & eps, Real kc, Real h) {
    Mandel4 b;
    for (int j = 0; j < 3; ++j) {
      Mandel e1 = eps, e2 = eps;
      e1(j) += h;
      e2(j) -= h;
      b.col(j) = (evaluate(m, e1, kc).stress - evaluate(m, e2, kc).stress) / (2. * h);
    }
    return b;
  }

  TEST(DamageLaw, ConsistentTangentMatchesFiniteDifferences) {
    const auto m = generic_damage();
    // both eigenvalues positive, one positive, shear dominated
    for (const Mandel & eps : {Mandel{2.1e-3, 0.6e-3, 0.9e-3}, Mandel{2.5e-3, -1.2e-3, 0.4e-3},
                             Mandel{0.3e-3, -0.2e-3, 2.6e-3}}) {
      const auto r = evaluate(m, eps, 0.);
      ASSERT_TRUE(r.softening);
      EXPECT_LT(rel(r.tangent, fd_tangent(m, eps, 0., 1e-7)), 1e-6) << eps.transpose();
    }
  }

  TEST(DamageLaw, StressIsEnergyGradientAtFixedHistory) {
    const auto m = generic_damage();
    const Mandel eps{2.1e-3, -0.4e-3, 0.9e-3};
    const Real kc = 4e-3;  // fixed history above the current measure
    const Real d = m.damage(kc);
    auto w = [&](const Mandel & e) { return 0.5 * (1. - d) * e.dot(m.stiffness() * e); };
    Mandel g;
    const Real h = 1e-7;
    for (int j = 0; j < 3; ++j) {
      Mandel e1 = eps, e2 = eps;
      e1(j) += h;
      e2(j) -= h;
      g(j) = (w(e1) - w(e2)) / (2. * h);
    }
    EXPECT_LT(rel(evaluate(m, eps, kc).stress, g), 1e-5);
  }

  TEST(DamageLaw, DegenerateEigenvaluesStayFinite) {
    const auto m = generic_damage();
    for (const Mandel & eps : {Mandel{2e-3, 2e-3 + 1e-12, 0.}, Mandel{2e-3, 2e-3, 1e-12 * sqrt2},
                             Mandel{-1e-12, 0., 0.}, Mandel{0., 0., 0.}}) {
      const auto r = evaluate(m, eps, 0.);
      EXPECT_TRUE(r.stress.allFinite());
      EXPECT_TRUE(r.tangent.allFinite());
    }
  }

  TEST(DamageLaw, RejectsNonFiniteStrain) {
    EXPECT_THROW(evaluate(generic_damage(), Mandel{NAN, 0., 0.}, 0.), MaterialError);
  }

  TEST(Regularization, CementPasteExample) {
    const Real h = 7.82e-4;
    const auto m = make_regularized_damage(12e9, 0.2, 60., 3e6, h);
    EXPECT_DOUBLE_EQ(m.kappa0, 2.5e-4);
    const Real ku = m.kappa0 + 2. * 60. / (3e6 * h);
    EXPECT_NEAR(ku, 5.14e-2, 5e-5);
    EXPECT_NEAR(m.ultimate_measure(), ku, 1e-14);
    EXPECT_NEAR(m.alpha, 4.88e-3, 1e-5);
  }

  TEST(Regularization, SofteningBranchDissipatesFractureEnergy) {
    for (const Real h : {7.82e-4, 3.91e-4, 1.5625e-3}) {
      const auto m = make_regularized_damage(12e9, 0.2, 60., 3e6, h);
      const Real k0 = m.kappa0, ku = m.ultimate_measure();
      // composite two-point Gauss of the uniaxial softening stress (1 - D) E0 kappa;
      // open nodes keep clear of the residual-stiffness floor at ku
      auto s = [&](Real k) { return (1. - m.damage(k)) * m.young * k; };
      const int n = 500;
      const Real dk = (ku - k0) / n, off = 0.5 * dk / std::sqrt(3.);
      Real area = 0.;
      for (int i = 0; i < n; ++i) {
        const Real mid = k0 + (i + 0.5) * dk;
        area += 0.5 * dk * (s(mid - off) + s(mid + off));
      }
      EXPECT_NEAR(area * h / 60., 1., 1e-10) << "h = " << h;
    }
  }

  TEST(Regularization, SnapBackRejected) {
    const Real hmax = 2. * 60. * 12e9 / (3e6 * 3e6);
    EXPECT_NO_THROW(regularize_softening(60., 3e6, 12e9, 0.99 * hmax));
    EXPECT_THROW(regularize_softening(60., 3e6, 12e9, 1.01 * hmax), MaterialError);
    EXPECT_THROW(regularize_softening(0., 3e6, 12e9, 1e-3), MaterialError);
  }

  TEST(DamageState, CommitAndDiscard) {
    DamageState s(3);
    s.record(0, 0.5, 0.1);
    s.record(1, 0.2, 0.05);
    EXPECT_EQ(s.committed(0), 0.);
    s.discard_trial();
    EXPECT_EQ(s.trial(0), 0.);
    EXPECT_EQ(s.damage(0), 0.);
    s.record(0, 0.5, 0.1);
    s.commit();
    EXPECT_EQ(s.committed(0), 0.5);
    EXPECT_EQ(s.committed_damage(0), 0.1);
    s.record(0, 0.3, 0.0);  // lower trial never lowers the history
    s.commit();
    EXPECT_EQ(s.committed(0), 0.5);
    EXPECT_EQ(s.committed_damage(0), 0.1);
  }

  TEST(DamageState, LoadUnloadReload) {
    const auto m = generic_damage();
    DamageState s(1);
    const Mandel dir{1., 0.3, 0.2};
    Real last_kappa = 0., last_d = 0.;
    for (const Real t : {0.5e-3, 1.5e-3, 3e-3, 1e-3, 0., -2e-3, 2e-3, 3e-3, 5e-3, 2e-3}) {
      const auto r = evaluate(m, t * dir, s.committed(0));
      s.record(0, r.kappa_trial, r.damage);
      s.commit();
      EXPECT_GE(s.committed(0), last_kappa);
      EXPECT_GE(s.committed_damage(0), last_d);
      EXPECT_GE(r.damage, 0.);
      EXPECT_LE(r.damage, 1.);
      last_kappa = s.committed(0);
      last_d = s.committed_damage(0);
    }
    EXPECT_GT(last_d, 0.);
  }

}  // namespace
