/**
 * @file   grid_fields.hpp
 *
 * @brief  Regular periodic grids and tensor fields over their quadrature
 *         points. Symmetric rank-2 tensors are stored in Mandel form
 *         (e11, e22, sqrt2*e12) so that tensor contractions are plain
 *         vector algebra.
 */
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace homog {

  using Real = double;
  using Index = std::ptrdiff_t;

  //! Mandel vector of a symmetric 2x2 tensor
  using Mandel = Eigen::Vector3d;
  //! rank-4 operator acting on Mandel vectors
  using Mandel4 = Eigen::Matrix3d;

  inline constexpr Real sqrt2 = 1.41421356237309504880;

  class GridError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
  };

  /**
   * Regular rectangular periodic cell with nx x ny pixels and nq quadrature
   * points per pixel. All quadrature points carry the same weight.
   */
  struct GridShape {
    Index nx{2};
    Index ny{2};
    Real lx{1.};
    Real ly{1.};
    Index nq{1};

    GridShape() = default;
    GridShape(Index nx_, Index ny_, Real lx_, Real ly_, Index nq_)
        : nx{nx_}, ny{ny_}, lx{lx_}, ly{ly_}, nq{nq_} {
      this->validate();
    }

    void validate() const {
      if (nx < 2 || ny < 2) {
        throw GridError("grid needs at least 2 pixels per direction");
      }
      if (!(lx > 0.) || !(ly > 0.) || !std::isfinite(lx) ||
          !std::isfinite(ly)) {
        throw GridError("cell lengths must be positive and finite");
      }
      if (nq < 1) {
        throw GridError("need at least one quadrature point per pixel");
      }
    }

    Index pixels() const { return nx * ny; }
    Index quad_points() const { return nx * ny * nq; }
    Real hx() const { return lx / static_cast<Real>(nx); }
    Real hy() const { return ly / static_cast<Real>(ny); }
    Real area() const { return lx * ly; }
    //! integration weight of a single quadrature point
    Real qp_weight() const { return this->area() / static_cast<Real>(this->quad_points()); }
    //! pixel index for (ix, iy); x runs fastest
    Index pixel(Index ix, Index iy) const { return iy * nx + ix; }

    bool operator==(const GridShape & other) const = default;
  };

  //! number of stored components per quadrature point for a tensor rank
  constexpr Index rank_components(int rank) {
    return rank == 0 ? 1 : (rank == 2 ? 3 : (rank == 4 ? 9 : -1));
  }

  /**
   * Tensor-valued field over the quadrature points of a grid. Storage is
   * pixel-major, quadrature-point-minor, tensor components innermost.
   */
  class QPField {
   public:
    QPField() = default;
    QPField(const GridShape & shape, int rank, Real fill = 0.)
        : shape_{shape}, rank_{rank} {
      if (rank_components(rank) < 0) {
        throw GridError("field rank must be 0, 2 or 4");
      }
      values_.assign(static_cast<std::size_t>(shape.quad_points() *
                                              rank_components(rank)),
                     fill);
    }

    const GridShape & shape() const { return shape_; }
    int rank() const { return rank_; }
    Index ncomp() const { return rank_components(rank_); }
    Index size() const { return static_cast<Index>(values_.size()); }

    std::vector<Real> & values() { return values_; }
    const std::vector<Real> & values() const { return values_; }
    Real * data() { return values_.data(); }
    const Real * data() const { return values_.data(); }

    Real & operator[](Index i) { return values_[static_cast<std::size_t>(i)]; }
    Real operator[](Index i) const { return values_[static_cast<std::size_t>(i)]; }

    //! flat offset of the first component at (pixel, quadrature point)
    Index offset(Index pixel, Index q) const {
      return (pixel * shape_.nq + q) * this->ncomp();
    }

    Eigen::Map<Mandel> mandel(Index pixel, Index q) {
      return Eigen::Map<Mandel>(values_.data() + this->offset(pixel, q));
    }
    Eigen::Map<const Mandel> mandel(Index pixel, Index q) const {
      return Eigen::Map<const Mandel>(values_.data() + this->offset(pixel, q));
    }
    //! rank-4 entry stored row-major (Eigen maps it transposed)
    Eigen::Map<Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>> tangent(Index pixel,
                                                                  Index q) {
      return Eigen::Map<Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>>(
          values_.data() + this->offset(pixel, q));
    }
    Eigen::Map<const Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>>
    tangent(Index pixel, Index q) const {
      return Eigen::Map<const Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>>(
          values_.data() + this->offset(pixel, q));
    }

    //! Mandel view of quadrature point number qp (flat over pixels and nq)
    Eigen::Map<Mandel> at(Index qp) {
      return Eigen::Map<Mandel>(values_.data() + qp * 3);
    }
    Eigen::Map<const Mandel> at(Index qp) const {
      return Eigen::Map<const Mandel>(values_.data() + qp * 3);
    }

    void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }
    void set_uniform(const Mandel & value) {
      this->require_rank(2);
      for (Index qp = 0; qp < shape_.quad_points(); ++qp) {
        this->at(qp) = value;
      }
    }

    void require_rank(int rank) const {
      if (rank_ != rank) {
        throw GridError("expected a rank-" + std::to_string(rank) + " field");
      }
    }

    bool all_finite() const {
      for (auto v : values_) {
        if (!std::isfinite(v)) {
          return false;
        }
      }
      return true;
    }

    QPField & operator+=(const QPField & other) {
      check_same(*this, other);
      for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
      return *this;
    }
    QPField & operator-=(const QPField & other) {
      check_same(*this, other);
      for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
      return *this;
    }
    QPField & operator*=(Real s) {
      for (auto & v : values_) v *= s;
      return *this;
    }
    //! this += s * other
    void axpy(Real s, const QPField & other) {
      check_same(*this, other);
      for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * other.values_[i];
    }

    static void check_same(const QPField & a, const QPField & b) {
      if (!(a.shape_ == b.shape_) || a.rank_ != b.rank_) {
        throw GridError("field shape mismatch");
      }
    }

   private:
    GridShape shape_{};
    int rank_{2};
    std::vector<Real> values_{};
  };

  inline QPField operator+(QPField a, const QPField & b) { return a += b; }
  inline QPField operator-(QPField a, const QPField & b) { return a -= b; }
  inline QPField operator*(Real s, QPField a) { return a *= s; }

  /* ---------------------------------------------------------------------- */
  // Mandel helpers

  inline Mandel to_mandel(const Eigen::Matrix2d & t) {
    return Mandel{t(0, 0), t(1, 1), sqrt2 * 0.5 * (t(0, 1) + t(1, 0))};
  }

  inline Eigen::Matrix2d from_mandel(const Mandel & m) {
    Eigen::Matrix2d t;
    t << m(0), m(2) / sqrt2, m(2) / sqrt2, m(1);
    return t;
  }

  //! plane-strain isotropic stiffness in Mandel form
  inline Mandel4 isotropic_stiffness(Real young, Real poisson) {
    const Real lambda = young * poisson / ((1. + poisson) * (1. - 2. * poisson));
    const Real mu = young / (2. * (1. + poisson));
    Mandel4 c;
    c << lambda + 2. * mu, lambda, 0.,  //
        lambda, lambda + 2. * mu, 0.,   //
        0., 0., 2. * mu;
    return c;
  }

  /* ---------------------------------------------------------------------- */
  // reductions. Fixed summation order: pairwise over quadrature points.

  namespace detail {
    template <class F>
    Real pairwise_sum(Index begin, Index end, const F & term) {
      if (end - begin <= 32) {
        Real acc{0.};
        for (Index i = begin; i < end; ++i) acc += term(i);
        return acc;
      }
      const Index mid = begin + (end - begin) / 2;
      return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
    }
  }  // namespace detail

  /**
   * Quadrature-weighted average of a rank-2 field. Rejects non-finite input.
   */
  inline Mandel field_mean(const QPField & f) {
    f.require_rank(2);
    if (!f.all_finite()) {
      throw GridError("field_mean: non-finite field value");
    }
    const Index n = f.shape().quad_points();
    Mandel mean;
    for (Index c = 0; c < 3; ++c) {
      mean(c) = detail::pairwise_sum(
          0, n, [&f, c](Index qp) { return f[qp * 3 + c]; });
    }
    return mean / static_cast<Real>(n);
  }

  //! quadrature-weighted inner product, sum_Q w_Q a_Q . b_Q
  inline Real field_inner(const QPField & a, const QPField & b) {
    QPField::check_same(a, b);
    const Index nc = a.ncomp();
    const Real sum = detail::pairwise_sum(0, a.shape().quad_points(), [&](Index qp) {
      Real acc{0.};
      for (Index c = 0; c < nc; ++c) acc += a[qp * nc + c] * b[qp * nc + c];
      return acc;
    });
    return sum * a.shape().qp_weight();
  }

  //! unweighted Euclidean dot product over all stored components
  inline Real euclid_dot(std::span<const Real> a, std::span<const Real> b) {
    if (a.size() != b.size()) {
      throw GridError("euclid_dot: size mismatch");
    }
    return detail::pairwise_sum(0, static_cast<Index>(a.size()),
                                [&](Index i) { return a[i] * b[i]; });
  }

  inline Real euclid_norm(std::span<const Real> a) { return std::sqrt(euclid_dot(a, a)); }

  inline Real euclid_norm(const QPField & f) { return euclid_norm(f.values()); }

}  // namespace homog
