#include "homog/damage_study.hpp"
#include "homog/microstructure.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace homog;

namespace {

  /**
   * Closed-form laminate stiffness, layers normal to x: e22 continuous,
   * (s11, s12) continuous. n = Mandel {0, 2}, t = {1}.
   */
  Mandel4 laminate_stiffness(const std::vector<std::pair<Real, Mandel4>> & layers) {
    using M2 = Eigen::Matrix2d;
    using V2 = Eigen::Vector2d;
    M2 inv_nn = M2::Zero();
    V2 inv_nt = V2::Zero();
    Real schur = 0.;
    for (const auto & [f, c] : layers) {
      M2 nn;
      nn << c(0, 0), c(0, 2), c(2, 0), c(2, 2);
      const V2 nt{c(0, 1), c(2, 1)};
      const M2 ni = nn.inverse();
      inv_nn += f * ni;
      inv_nt += f * ni * nt;
      schur += f * (c(1, 1) - nt.dot(ni * nt));
    }
    const M2 cnn = inv_nn.inverse();
    const V2 cnt = cnn * inv_nt;
    const Real ctt = schur + inv_nt.dot(cnn * inv_nt);
    Mandel4 out;
    out << cnn(0, 0), cnt(0), cnn(0, 1), cnt(0), ctt, cnt(1), cnn(1, 0), cnt(1), cnn(1, 1);
    return out;
  }

  Cell laminate_cell(ZeroFrequencyMode bc = ZeroFrequencyMode::StrainControl) {
    const GridShape g{10, 6, 2., 1., 2};
    return Cell(g, DerivativeScheme::LinearFE, laminate(g, 3), {LinearElastic{1., 0.3}, LinearElastic{20., 0.15}},
                bc);
  }

  TrustRegionConfig tight() {
    TrustRegionConfig cfg;
    cfg.R0 = 1e3;
    cfg.Rmax = 1e3;
    cfg.eta_eq = 1e-13;
    cfg.krylov.eta_cg = 1e-13;
    return cfg;
  }

  TEST(Cell, Validation) {
    const GridShape g{4, 4, 1., 1., 1};
    EXPECT_THROW(Cell(g, DerivativeScheme::Fourier, std::vector<int>(15, 0), {LinearElastic{}},
                      ZeroFrequencyMode::StrainControl),
                 CellError);
    EXPECT_THROW(Cell(g, DerivativeScheme::Fourier, std::vector<int>(16, 1), {LinearElastic{}},
                      ZeroFrequencyMode::StrainControl),
                 CellError);
    EXPECT_THROW(Cell(g, DerivativeScheme::Fourier, std::vector<int>(16, 0), {LinearElastic{-1., 0.3}},
                      ZeroFrequencyMode::StrainControl),
                 MaterialError);
    Cell c(g, DerivativeScheme::Fourier, std::vector<int>(16, 0), {LinearElastic{}}, ZeroFrequencyMode::StrainControl);
    EXPECT_THROW(c.apply_increment({LoadKind::MeanStress, Mandel{1., 0., 0.}}), CellError);
  }

  TEST(AssembleRhs, UniformCellHasZeroRhs) {
    const GridShape g{8, 8, 1., 1., 1};
    Cell c(g, DerivativeScheme::LinearFE, std::vector<int>(64, 0), {LinearElastic{3., 0.2}},
           ZeroFrequencyMode::StrainControl);
    c.apply_increment({LoadKind::MeanStrain, Mandel{0.01, 0.02, -0.03}});
    c.evaluate_current();
    EXPECT_LT(euclid_norm(c.assemble_rhs()), 1e-15);
  }

  TEST(AssembleRhs, StressControlCarriesMeanImbalance) {
    Cell c = laminate_cell(ZeroFrequencyMode::StressControl);
    test::randomize(c.strain(), 3);
    c.apply_increment({LoadKind::MeanStress, Mandel{0.5, -0.2, 0.1}});
    c.evaluate_current();
    const QPField b = c.assemble_rhs();
    // k = 0 block maps the mean onto itself, so mean(b) = target - mean(sigma)
    EXPECT_LT((field_mean(b) - (c.stress_target() - field_mean(c.stress()))).norm(), 1e-13);
    QPField ref = c.projection().apply(c.energy_gradient(c.stress()));
    ref *= -1.;
    EXPECT_LT(test::rel_diff(ref, b), 1e-15);
  }

  TEST(ApplySystem, LinearAndProjected) {
    Cell c = laminate_cell();
    test::randomize(c.strain(), 4);
    c.evaluate_current();
    const auto x = test::random_field(c.grid(), 2, 5), y = test::random_field(c.grid(), 2, 6);
    const QPField lhs = c.apply_system(2. * x + y);
    const QPField rhs = 2. * c.apply_system(x) + c.apply_system(y);
    EXPECT_LT(test::rel_diff(lhs, rhs), 1e-14);
    const QPField gx = c.apply_system(x);
    EXPECT_LT(test::rel_diff(gx, c.projection().apply(gx)), 1e-12);
  }

  TEST(EffectiveStiffness, HomogeneousCellGivesMaterialStiffness) {
    const GridShape g{8, 6, 1., 1., 1};
    Cell c(g, DerivativeScheme::LinearFE, std::vector<int>(48, 0), {LinearElastic{3., 0.2}},
           ZeroFrequencyMode::StrainControl);
    const auto es = effective_stiffness(c);
    EXPECT_LT((es.stiffness - isotropic_stiffness(3., 0.2)).norm(), 1e-12);
  }

  TEST(EffectiveStiffness, LaminateMatchesClosedForm) {
    Cell c = laminate_cell();
    const auto es = effective_stiffness(c);
    const Mandel4 ref = laminate_stiffness({{0.3, isotropic_stiffness(20., 0.15)}, {0.7, isotropic_stiffness(1., 0.3)}});
    EXPECT_LT((es.stiffness - ref).norm() / ref.norm(), 1e-8);
    EXPECT_LT((es.stiffness - es.stiffness.transpose()).norm() / ref.norm(), 1e-8);
    EXPECT_NEAR(es.norm, es.stiffness.norm(), 1e-12 * es.norm);
    EXPECT_FALSE(es.fallback);
  }

  TEST(EffectiveStiffness, LaminateBoundedByVoigtAndReuss) {
    Cell c = laminate_cell();
    const Mandel4 ca = isotropic_stiffness(20., 0.15), cb = isotropic_stiffness(1., 0.3);
    const Mandel4 voigt = 0.3 * ca + 0.7 * cb;
    const Mandel4 reuss = (0.3 * ca.inverse() + 0.7 * cb.inverse()).inverse();
    const Mandel4 e = effective_stiffness(c).stiffness;
    const Mandel4 es = 0.5 * (e + e.transpose());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mandel4>(voigt - es).eigenvalues().minCoeff(), -1e-10);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mandel4>(es - reuss).eigenvalues().minCoeff(), -1e-10);
  }

  TEST(Solve, LaminateStrainIsExactAndCompatible) {
    Cell c = laminate_cell();
    const Mandel applied{0.01, -0.004, 0.006};
    const auto rep = trust_region_solve(c, LoadProgram::constant(LoadKind::MeanStrain, applied, 1), tight());
    ASSERT_TRUE(rep.converged);
    EXPECT_LT((field_mean(c.strain()) - applied).norm(), 1e-14);
    QPField fluct = c.strain();
    for (Index qp = 0; qp < c.grid().quad_points(); ++qp) fluct.at(qp) -= applied;
    EXPECT_LT(test::rel_diff(fluct, c.projection().apply(fluct)), 1e-10);
    // laminate solution: uniform strain per layer, equal normal stress
    const Mandel s0 = c.stress().at(0);
    for (Index qp = 0; qp < c.grid().quad_points(); ++qp) {
      EXPECT_NEAR(c.stress().at(qp)(0), s0(0), 1e-10);
      EXPECT_NEAR(c.stress().at(qp)(2), s0(2), 1e-10);
      EXPECT_NEAR(c.strain().at(qp)(1), applied(1), 1e-12);
    }
  }

  TEST(Solve, StressControlReachesTarget) {
    Cell c = laminate_cell(ZeroFrequencyMode::StressControl);
    const Mandel target{0.3, 0.1, -0.05};
    const auto rep = trust_region_solve(c, LoadProgram::constant(LoadKind::MeanStress, target, 1), tight());
    ASSERT_TRUE(rep.converged);
    EXPECT_LT((field_mean(c.stress()) - target).norm(), 1e-12);
    Cell ref = laminate_cell();
    const Mandel4 ceff = effective_stiffness(ref).stiffness;
    EXPECT_LT((field_mean(c.strain()) - ceff.inverse() * target).norm(), 1e-9);
  }

  /* ---------------------------------------------------------------------- */
  const GridShape rve{64, 64, 0.05, 0.05, 1};

  TEST(Microstructure, SameSeedSameMap) {
    const MicrostructureParams p;
    const auto a = generate_microstructure(rve, 7, p), b = generate_microstructure(rve, 7, p);
    EXPECT_EQ(a.phase, b.phase);
    EXPECT_EQ(a.gel_cells, b.gel_cells);
    EXPECT_NE(a.phase, generate_microstructure(rve, 8, p).phase);
  }

  TEST(Microstructure, FractionsAndGel) {
    MicrostructureParams p;
    const GridShape fine{128, 128, 0.05, 0.05, 1};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto m = generate_microstructure(fine, seed, p);
      EXPECT_NEAR(m.aggregate_fraction, p.aggregate_fraction, 0.02);
      Index gel = 0;
      for (int ph : m.phase) gel += ph == Gel;
      EXPECT_NEAR(static_cast<Real>(gel) / static_cast<Real>(fine.pixels()), p.gel_fraction, 1e-3);
    }
    p.gel_fraction = 0.;
    const auto none = generate_microstructure(rve, 1, p);
    for (int ph : none.phase) EXPECT_NE(ph, Gel);
  }

  TEST(Microstructure, GelSitsInsideAggregatesOnEveryResolution) {
    const MicrostructureParams p;
    const auto coarse = generate_microstructure(rve, 3, p);
    const auto fine = generate_microstructure(GridShape{128, 128, 0.05, 0.05, 1}, 3, p);
    EXPECT_EQ(coarse.gel_cells, fine.gel_cells);
    const auto mask = coarse.gel_mask();
    for (Index i = 0; i < rve.pixels(); ++i)
      EXPECT_EQ(mask[static_cast<std::size_t>(i)] != 0, coarse.phase[static_cast<std::size_t>(i)] == Gel);
  }

  TEST(Microstructure, GridMustMatchGelLattice) {
    EXPECT_THROW(generate_microstructure(GridShape{48, 48, 0.05, 0.05, 1}, 1, {}), MicrostructureError);
  }

  TEST(DamageStudy, DegradationStartsAtOneAndDecreases) {
    const auto m = generate_microstructure(rve, 2, {});
    Cell cell = make_damage_cell(m, ConcreteProperties{});
    TrustRegionConfig cfg;
    cfg.eta_eq = 1e-2;
    cfg.max_newton = 500;
    const auto curve = run_damage_study(cell, 1e-3, 3, cfg);
    ASSERT_TRUE(curve.complete) << curve.status;
    ASSERT_EQ(curve.rows.size(), 4u);
    EXPECT_EQ(curve.rows[0].stiffness_ratio, 1.);
    for (std::size_t i = 1; i < curve.rows.size(); ++i) {
      EXPECT_LE(curve.rows[i].stiffness_ratio, curve.rows[i - 1].stiffness_ratio + 1e-12);
      EXPECT_NEAR(curve.rows[i].sum_eigenstrain, 1e-3 * static_cast<Real>(i), 1e-15);
    }
    EXPECT_LT(curve.rows.back().stiffness_ratio, 1.);
    EXPECT_GT(cell.damaged_qp_count(), 0);
    EXPECT_LE(cell.max_damage(), 1.);
    // free expansion: mean stress stays at zero
    EXPECT_LT(field_mean(cell.stress()).norm(), 1e-3 * 3e6);
  }

  TEST(DamageStudy, RequiresStressControl) {
    const auto m = generate_microstructure(rve, 2, {});
    Cell cell = make_damage_cell(m, ConcreteProperties{}, DerivativeScheme::LinearFE, ZeroFrequencyMode::StrainControl);
    EXPECT_THROW(run_damage_study(cell, 1e-3, 1, TrustRegionConfig{}), CellError);
  }

}  // namespace
