#include "homog/grid_fields.hpp"
#include "homog/npy.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace homog;

namespace {

  const GridShape grid{6, 5, 2., 3., 2};

  TEST(GridShape, RejectsInvalid) {
    EXPECT_THROW(GridShape(1, 4, 1., 1., 1), GridError);
    EXPECT_THROW(GridShape(4, 4, 0., 1., 1), GridError);
    EXPECT_THROW(GridShape(4, 4, 1., 1., 0), GridError);
    EXPECT_DOUBLE_EQ(grid.hx(), 2. / 6.);
    EXPECT_DOUBLE_EQ(grid.qp_weight() * static_cast<Real>(grid.quad_points()), grid.area());
  }

  TEST(QPField, ComponentCount) {
    EXPECT_EQ(QPField(grid, 0).size(), 60);
    EXPECT_EQ(QPField(grid, 2).size(), 180);
    EXPECT_EQ(QPField(grid, 4).size(), 540);
    EXPECT_THROW(QPField(grid, 3), GridError);
  }

  TEST(FieldMean, UniformField) {
    QPField f(grid, 2);
    const Mandel e{0.1, -0.2, 0.3};
    f.set_uniform(e);
    EXPECT_LT((field_mean(f) - e).norm(), 1e-15);
  }

  TEST(FieldMean, PeriodicWaveAveragesOut) {
    QPField f(grid, 2);
    const Mandel e{1., 2., 3.};
    for (Index iy = 0; iy < grid.ny; ++iy) {
      for (Index ix = 0; ix < grid.nx; ++ix) {
        const Real w = std::sin(2. * std::numbers::pi * 2. * static_cast<Real>(ix) / 6.) +
                       std::cos(2. * std::numbers::pi * static_cast<Real>(iy) / 5.);
        for (Index q = 0; q < grid.nq; ++q) f.mandel(grid.pixel(ix, iy), q) = e + w * Mandel{1., -1., 0.5};
      }
    }
    EXPECT_LT((field_mean(f) - e).norm(), 1e-14);
  }

  TEST(FieldMean, MatchesBruteForce) {
    const QPField f = test::random_field(grid, 2, 1);
    Mandel ref = Mandel::Zero();
    for (Index qp = 0; qp < grid.quad_points(); ++qp) ref += f.at(qp);
    ref /= static_cast<Real>(grid.quad_points());
    EXPECT_LT((field_mean(f) - ref).norm(), 1e-14);
  }

  TEST(FieldMean, Linear) {
    const QPField a = test::random_field(grid, 2, 2), b = test::random_field(grid, 2, 3);
    QPField c = 2.5 * a;
    c.axpy(-0.75, b);
    const Mandel ref = 2.5 * field_mean(a) - 0.75 * field_mean(b);
    EXPECT_LT((field_mean(c) - ref).norm(), 1e-14 * ref.norm());
  }

  TEST(FieldMean, RejectsNonFinite) {
    QPField f(grid, 2);
    f[7] = std::numeric_limits<Real>::quiet_NaN();
    EXPECT_THROW(field_mean(f), GridError);
  }

  TEST(FieldInner, Trivial) {
    const QPField z(grid, 2);
    EXPECT_EQ(field_inner(z, z), 0.);
    QPField a(grid, 2), b(grid, 2);
    a[0] = 1.;
    b[1] = 1.;
    EXPECT_EQ(field_inner(a, b), 0.);
  }

  TEST(FieldInner, MatchesBruteForceAndIsSymmetric) {
    for (int rank : {0, 2, 4}) {
      const QPField a = test::random_field(grid, rank, 4), b = test::random_field(grid, rank, 5);
      Real ref = 0.;
      for (Index i = 0; i < a.size(); ++i) ref += a[i] * b[i];
      ref *= grid.qp_weight();
      EXPECT_NEAR(field_inner(a, b), ref, 1e-13 * std::abs(ref));
      EXPECT_EQ(field_inner(a, b), field_inner(b, a));
      EXPECT_GT(field_inner(a, a), 0.);
    }
  }

  TEST(FieldInner, ShapeMismatch) {
    const QPField a(grid, 2), b(GridShape{6, 5, 2., 3., 1}, 2), c(grid, 4);
    EXPECT_THROW(field_inner(a, b), GridError);
    EXPECT_THROW(field_inner(a, c), GridError);
  }

  TEST(Mandel, RoundTripAndNorm) {
    Eigen::Matrix2d t;
    t << 0.3, -0.7, -0.7, 1.1;
    const Mandel m = to_mandel(t);
    EXPECT_LT((from_mandel(m) - t).norm(), 1e-16);
    EXPECT_NEAR(m.norm(), t.norm(), 1e-15);
    EXPECT_NEAR(m(2), std::sqrt(2.) * -0.7, 1e-15);
  }

  TEST(Mandel, StiffnessActsOnEngineeringTensors) {
    const Real e = 2.5, nu = 0.2;
    const Real lambda = e * nu / ((1 + nu) * (1 - 2 * nu)), mu = e / (2 * (1 + nu));
    Eigen::Matrix2d eps;
    eps << 0.01, 0.02, 0.02, -0.03;
    const Eigen::Matrix2d sig = lambda * eps.trace() * Eigen::Matrix2d::Identity() + 2 * mu * eps;
    EXPECT_LT((isotropic_stiffness(e, nu) * to_mandel(eps) - to_mandel(sig)).norm(), 1e-15);
  }

  TEST(Npy, RoundTrip) {
    const QPField f = test::random_field(grid, 2, 9);
    const auto dir = std::filesystem::temp_directory_path() / "homog_npy_test";
    std::filesystem::create_directories(dir);
    npy::dump_field(dir / "f", f, "1");
    const npy::Array a = npy::read(dir / "f.npy");
    EXPECT_EQ(a.shape, (std::vector<std::size_t>{5, 6, 2, 3}));
    ASSERT_EQ(a.data.size(), f.values().size());
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_EQ(a.data[i], f.values()[i]);
    EXPECT_TRUE(std::filesystem::exists(dir / "f.json"));
  }

}  // namespace
