/**
 * @file   fft_projection.hpp
 *
 * @brief  Discrete derivative operators in Fourier space (spectral or
 *         linear finite elements on two triangles per pixel) and the
 *         small-strain compatibility projection built from them, applied
 *         to quadrature-point fields through FFTW.
 *
 * Conventions: the forward transform is unnormalised, the inverse carries
 * 1/(nx*ny). Frequencies are the standard DFT grid, pixel index x fastest.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

namespace homog {

  using Complex = std::complex<Real>;

  enum class DerivativeScheme { Fourier, LinearFE };
  enum class ZeroFrequencyMode { StrainControl, StressControl };

  inline const char * to_string(DerivativeScheme s) {
    return s == DerivativeScheme::Fourier ? "fourier" : "linear_fe";
  }

  //! quadrature points per pixel implied by a scheme
  inline Index scheme_quad_points(DerivativeScheme s) {
    return s == DerivativeScheme::Fourier ? 1 : 2;
  }

  class ProjectionError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  /* ---------------------------------------------------------------------- */
  namespace detail {
    inline std::mutex & fftw_planner_mutex() {
      static std::mutex m;
      return m;
    }

    struct FFTWFree {
      void operator()(fftw_complex * p) const { fftw_free(p); }
    };
    using FFTWBuffer = std::unique_ptr<fftw_complex[], FFTWFree>;

    inline FFTWBuffer fftw_buffer(Index n) {
      auto * p = static_cast<fftw_complex *>(
          fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n)));
      if (p == nullptr) throw std::bad_alloc();
      return FFTWBuffer(p);
    }

    //! signed integer frequency of DFT index i on n points
    inline Index signed_frequency(Index i, Index n) { return i <= (n - 1) / 2 ? i : i - n; }
  }  // namespace detail

  /**
   * Batched 2D complex FFT over pixels for `channels` interleaved channels
   * (channel index innermost). Execution is const and reentrant; plan
   * creation is serialised.
   */
  class GridFFT {
   public:
    GridFFT() = default;
    GridFFT(const GridShape & grid, Index channels) : grid_{grid}, channels_{channels} {
      const Index n = grid.pixels() * channels;
      auto in = detail::fftw_buffer(n);
      auto out = detail::fftw_buffer(n);
      int dims[2] = {static_cast<int>(grid.ny), static_cast<int>(grid.nx)};
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      auto make = [&](int sign) {
        fftw_plan p = fftw_plan_many_dft(2, dims, static_cast<int>(channels), in.get(),
                                         nullptr, static_cast<int>(channels), 1,
                                         out.get(), nullptr, static_cast<int>(channels),
                                         1, sign, FFTW_ESTIMATE);
        if (p == nullptr) throw ProjectionError("FFTW planning failed");
        return std::shared_ptr<fftw_plan_s>(p, [](fftw_plan q) {
          std::lock_guard<std::mutex> l(detail::fftw_planner_mutex());
          fftw_destroy_plan(q);
        });
      };
      forward_ = make(FFTW_FORWARD);
      backward_ = make(FFTW_BACKWARD);
    }

    Index size() const { return grid_.pixels() * channels_; }
    detail::FFTWBuffer buffer() const { return detail::fftw_buffer(this->size()); }

    void forward(fftw_complex * in, fftw_complex * out) const {
      fftw_execute_dft(forward_.get(), in, out);
    }
    //! unnormalised inverse
    void backward(fftw_complex * in, fftw_complex * out) const {
      fftw_execute_dft(backward_.get(), in, out);
    }

   private:
    GridShape grid_{};
    Index channels_{0};
    std::shared_ptr<fftw_plan_s> forward_{};
    std::shared_ptr<fftw_plan_s> backward_{};
  };

  /* ---------------------------------------------------------------------- */
  /**
   * Fourier-space gradient: dhat(k, q, alpha) maps the DFT of a nodal
   * (Fourier: pixel) scalar to the DFT of its alpha-derivative at
   * quadrature point q.
   */
  struct DerivativeOperator {
    GridShape shape{};
    DerivativeScheme scheme{DerivativeScheme::LinearFE};
    std::vector<Complex> dhat{};

    Complex operator()(Index k, Index q, Index alpha) const {
      return dhat[static_cast<std::size_t>((k * shape.nq + q) * 2 + alpha)];
    }
    Complex & operator()(Index k, Index q, Index alpha) {
      return dhat[static_cast<std::size_t>((k * shape.nq + q) * 2 + alpha)];
    }
  };

  /**
   * Builds the derivative operator for a scheme. The grid's nq is replaced
   * by the scheme's quadrature count (1 for Fourier, 2 for LinearFE).
   *
   * LinearFE: pixel (i, j) with corner nodes n00=(i,j), n10=(i+1,j),
   * n01=(i,j+1), n11=(i+1,j+1) is split along the n00-n11 diagonal into
   * q=0 (n00, n10, n11) and q=1 (n00, n11, n01).
   */
  inline DerivativeOperator build_derivative(DerivativeScheme scheme, GridShape grid) {
    grid.nq = scheme_quad_points(scheme);
    grid.validate();
    DerivativeOperator d{grid, scheme, {}};
    d.dhat.assign(static_cast<std::size_t>(grid.pixels() * grid.nq * 2), Complex{});
    const Real two_pi = 2. * std::numbers::pi;
    const Complex I{0., 1.};
    for (Index iy = 0; iy < grid.ny; ++iy) {
      for (Index ix = 0; ix < grid.nx; ++ix) {
        const Index k = grid.pixel(ix, iy);
        switch (scheme) {
          case DerivativeScheme::Fourier: {
            Index fx = detail::signed_frequency(ix, grid.nx);
            Index fy = detail::signed_frequency(iy, grid.ny);
            // the Nyquist mode of a real signal has no derivative
            if (grid.nx % 2 == 0 && ix == grid.nx / 2) fx = 0;
            if (grid.ny % 2 == 0 && iy == grid.ny / 2) fy = 0;
            d(k, 0, 0) = I * (two_pi * static_cast<Real>(fx) / grid.lx);
            d(k, 0, 1) = I * (two_pi * static_cast<Real>(fy) / grid.ly);
            break;
          }
          case DerivativeScheme::LinearFE: {
            const Real tx = two_pi * static_cast<Real>(ix) / static_cast<Real>(grid.nx);
            const Real ty = two_pi * static_cast<Real>(iy) / static_cast<Real>(grid.ny);
            const Complex ex = std::exp(I * tx);
            const Complex ey = std::exp(I * ty);
            const Complex exy = ex * ey;
            const Real hx = grid.hx();
            const Real hy = grid.hy();
            d(k, 0, 0) = (ex - 1.) / hx;
            d(k, 0, 1) = (exy - ex) / hy;
            d(k, 1, 0) = (exy - ey) / hx;
            d(k, 1, 1) = (ey - 1.) / hy;
            break;
          }
          default:
            throw ProjectionError("unsupported derivative scheme");
        }
      }
    }
    return d;
  }

  /* ---------------------------------------------------------------------- */
  /**
   * Per-frequency projector onto compatible strains. Blocks are
   * (3 nq) x (3 nq) complex matrices acting on Mandel strains stacked over
   * quadrature points; block storage is shared between copies so a
   * different zero-frequency mode is cheap to derive.
   */
  class ProjectionOperator {
   public:
    using Block = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

    ProjectionOperator() = default;

    const GridShape & shape() const { return shape_; }
    ZeroFrequencyMode zero_freq_mode() const { return mode_; }
    Index block_size() const { return 3 * shape_.nq; }

    //! copy sharing the k != 0 blocks with a different k = 0 treatment
    ProjectionOperator with_mode(ZeroFrequencyMode mode) const {
      ProjectionOperator p = *this;
      p.mode_ = mode;
      return p;
    }

    //! projector block at frequency k (k = 0 reflects the zero-frequency mode)
    Block block(Index k) const {
      const Index n = this->block_size();
      if (k == 0) return this->zero_block();
      Block b(n, n);
      const Complex * src = blocks_->data() + k * n * n;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) b(r, c) = src[r * n + c];
      return b;
    }

    struct Diagnostics {
      Real max_imag{0.};  //!< largest |Im| before truncation
    };

    /**
     * Projects a rank-2 field. Output is real; the discarded imaginary
     * residue is reported through `diag` when given.
     */
    void apply(const QPField & in, QPField & out, Diagnostics * diag = nullptr) const {
      in.require_rank(2);
      if (!(in.shape() == shape_)) throw ProjectionError("apply_projection: shape mismatch");
      if (!(out.shape() == shape_) || out.rank() != 2) out = QPField(shape_, 2);
      const Index n = this->block_size();
      const Index npix = shape_.pixels();
      auto a = fft_.buffer();
      auto b = fft_.buffer();
      const Real * src = in.data();
      for (Index i = 0; i < npix * n; ++i) {
        a[i][0] = src[i];
        a[i][1] = 0.;
      }
      fft_.forward(a.get(), b.get());
      const Block zero = this->zero_block();
      std::vector<Complex> tmp(static_cast<std::size_t>(n));
      for (Index k = 0; k < npix; ++k) {
        auto * v = reinterpret_cast<Complex *>(b.get() + k * n);
        if (k == 0) {
          for (Index r = 0; r < n; ++r) {
            Complex acc{};
            for (Index c = 0; c < n; ++c) acc += zero(r, c) * v[c];
            tmp[r] = acc;
          }
        } else {
          const Complex * blk = blocks_->data() + k * n * n;
          for (Index r = 0; r < n; ++r) {
            Complex acc{};
            for (Index c = 0; c < n; ++c) acc += blk[r * n + c] * v[c];
            tmp[r] = acc;
          }
        }
        std::copy(tmp.begin(), tmp.end(), v);
      }
      fft_.backward(b.get(), a.get());
      const Real scale = 1. / static_cast<Real>(npix);
      Real * dst = out.data();
      Real max_imag{0.};
      for (Index i = 0; i < npix * n; ++i) {
        dst[i] = a[i][0] * scale;
        max_imag = std::max(max_imag, std::abs(a[i][1] * scale));
      }
      if (diag != nullptr) diag->max_imag = max_imag;
    }

    QPField apply(const QPField & in, Diagnostics * diag = nullptr) const {
      QPField out(shape_, 2);
      this->apply(in, out, diag);
      return out;
    }

    friend ProjectionOperator build_projection(const DerivativeOperator & d,
                                               ZeroFrequencyMode mode);

   private:
    Block zero_block() const {
      const Index n = this->block_size();
      Block z = Block::Zero(n, n);
      if (mode_ == ZeroFrequencyMode::StressControl) {
        // projector onto strains that are equal at every quadrature point
        const Real w = 1. / static_cast<Real>(shape_.nq);
        for (Index q1 = 0; q1 < shape_.nq; ++q1)
          for (Index q2 = 0; q2 < shape_.nq; ++q2)
            for (Index c = 0; c < 3; ++c) z(q1 * 3 + c, q2 * 3 + c) = w;
      }
      return z;
    }

    GridShape shape_{};
    ZeroFrequencyMode mode_{ZeroFrequencyMode::StrainControl};
    std::shared_ptr<const std::vector<Complex>> blocks_{};
    GridFFT fft_{};
  };

  /**
   * Columns of the map u_hat (2 displacement components) -> stacked Mandel
   * strain sym(D_q (x) u) at frequency k.
   */
  inline Eigen::Matrix<Complex, Eigen::Dynamic, 2>
  symmetric_gradient_block(const DerivativeOperator & d, Index k) {
    const Index nq = d.shape.nq;
    Eigen::Matrix<Complex, Eigen::Dynamic, 2> s(3 * nq, 2);
    const Real r = 1. / sqrt2;
    for (Index q = 0; q < nq; ++q) {
      const Complex d1 = d(k, q, 0);
      const Complex d2 = d(k, q, 1);
      s(3 * q + 0, 0) = d1;
      s(3 * q + 1, 0) = 0.;
      s(3 * q + 2, 0) = r * d2;
      s(3 * q + 0, 1) = 0.;
      s(3 * q + 1, 1) = d2;
      s(3 * q + 2, 1) = r * d1;
    }
    return s;
  }

  /**
   * Orthogonal projector (uniform quadrature weights, Mandel metric) onto
   * the range of the symmetrised gradient at every frequency. Each block is
   * Q Q^H with Q an orthonormalised basis of that range.
   */
  inline ProjectionOperator build_projection(const DerivativeOperator & d,
                                             ZeroFrequencyMode mode) {
    const GridShape & g = d.shape;
    const Index n = 3 * g.nq;
    auto blocks = std::make_shared<std::vector<Complex>>(
        static_cast<std::size_t>(g.pixels() * n * n), Complex{});
    Real dscale{0.};
    for (auto & v : d.dhat) dscale = std::max(dscale, std::abs(v));

    for (Index k = 1; k < g.pixels(); ++k) {
      auto s = symmetric_gradient_block(d, k);
      Real dd{0.};
      for (Index q = 0; q < g.nq; ++q)
        dd += std::norm(d(k, q, 0)) + std::norm(d(k, q, 1));
      if (dd <= 1e-28 * dscale * dscale) {
        if (d.scheme == DerivativeScheme::Fourier) {
          // Nyquist corner of an even grid: nothing compatible lives here
          continue;
        }
        throw ProjectionError("degenerate derivative operator at nonzero frequency");
      }
      // Gram-Schmidt with one reorthogonalisation pass
      Eigen::Matrix<Complex, Eigen::Dynamic, 2> q = s;
      for (int col = 0; col < 2; ++col) {
        for (int pass = 0; pass < 2; ++pass) {
          for (int prev = 0; prev < col; ++prev) {
            const Complex proj = q.col(prev).dot(q.col(col));
            q.col(col) -= proj * q.col(prev);
          }
        }
        const Real nrm = q.col(col).norm();
        if (nrm <= 1e-14 * s.norm()) {
          throw ProjectionError("rank-deficient symmetric gradient block");
        }
        q.col(col) /= nrm;
      }
      ProjectionOperator::Block p = q * q.adjoint();
      // enforce exact Hermitian symmetry
      p = 0.5 * (p + p.adjoint()).eval();
      Complex * dst = blocks->data() + k * n * n;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) dst[r * n + c] = p(r, c);
    }

    ProjectionOperator op;
    op.shape_ = g;
    op.mode_ = mode;
    op.blocks_ = std::move(blocks);
    op.fft_ = GridFFT(g, n);
    return op;
  }

  inline QPField apply_projection(const ProjectionOperator & p, const QPField & f,
                                  ProjectionOperator::Diagnostics * diag = nullptr) {
    return p.apply(f, diag);
  }

  /**
   * Strain field sym(grad u) of a periodic nodal displacement field given as
   * (pixel, component) pairs, computed with the same discrete derivative.
   */
  inline QPField compatible_strain(const DerivativeOperator & d,
                                   std::span<const Real> nodal_displacement) {
    const GridShape & g = d.shape;
    if (static_cast<Index>(nodal_displacement.size()) != 2 * g.pixels()) {
      throw ProjectionError("compatible_strain: expected 2 components per node");
    }
    GridFFT fft2(g, 2);
    auto u = fft2.buffer();
    auto uh = fft2.buffer();
    for (Index i = 0; i < 2 * g.pixels(); ++i) {
      u[i][0] = nodal_displacement[i];
      u[i][1] = 0.;
    }
    fft2.forward(u.get(), uh.get());
    const Index n = 3 * g.nq;
    GridFFT fftn(g, n);
    auto eh = fftn.buffer();
    auto e = fftn.buffer();
    for (Index k = 0; k < g.pixels(); ++k) {
      const auto s = symmetric_gradient_block(d, k);
      Eigen::Vector2cd uk{Complex{uh[2 * k][0], uh[2 * k][1]},
                          Complex{uh[2 * k + 1][0], uh[2 * k + 1][1]}};
      const Eigen::VectorXcd ek = s * uk;
      for (Index r = 0; r < n; ++r) {
        eh[k * n + r][0] = ek(r).real();
        eh[k * n + r][1] = ek(r).imag();
      }
    }
    fftn.backward(eh.get(), e.get());
    QPField out(g, 2);
    const Real scale = 1. / static_cast<Real>(g.pixels());
    for (Index i = 0; i < g.pixels() * n; ++i) out[i] = e[i][0] * scale;
    return out;
  }

}  // namespace homog
