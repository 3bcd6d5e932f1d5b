/**
 * @file   krylov.hpp
 *
 * @brief  Matrix-free CG-Steihaug trust-region subproblem solver with an
 *         orthogonality reset. Minimises m(p) = -b.p + 1/2 p.A.p over
 *         |p| <= R, so interior convergence solves A p = b.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

namespace homog {

  class KrylovError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  using Vector = std::vector<Real>;

  struct KrylovConfig {
    Real eta_cg{1e-8};
    //! tolerance is eta_cg * |b| when true, eta_cg when false
    bool relative{true};
    //! 0 selects min(10 sqrt(n), n)
    Index max_iter{0};
    //! restart threshold on |g_{j+1}.g_j| / |g_{j+1}|^2; +inf disables resets
    Real reset_threshold{0.2};

    void validate() const {
      if (!(eta_cg > 0.)) throw KrylovError("krylov: eta_cg must be positive");
      if (max_iter < 0) throw KrylovError("krylov: max_iter must be >= 0");
      const bool disabled = std::isinf(reset_threshold) && reset_threshold > 0.;
      if (!disabled && !(reset_threshold > 0.1 && reset_threshold < 0.9)) {
        throw KrylovError("krylov: reset_threshold must lie in (0.1, 0.9)");
      }
    }

    Index iteration_cap(Index n) const {
      if (max_iter > 0) return max_iter;
      const auto cap = static_cast<Index>(std::ceil(10. * std::sqrt(static_cast<Real>(n))));
      return std::max<Index>(1, std::min(cap, n));
    }
  };

  enum class Termination { Converged, BoundaryHit, NegativeCurvature, MaxIter };

  inline const char * to_string(Termination t) {
    switch (t) {
      case Termination::Converged: return "converged";
      case Termination::BoundaryHit: return "boundary";
      case Termination::NegativeCurvature: return "negative_curvature";
      case Termination::MaxIter: return "max_iter";
    }
    return "?";
  }

  struct KrylovIterate {
    Index j{0};
    Real residual{0.};
    Real model{0.};  //!< m(z_j) of the iterate after step j
    Real step_norm{0.};
    bool reset{false};
  };

  struct SubproblemResult {
    Vector p{};
    Termination termination{Termination::Converged};
    Index iterations{0};
    Index resets{0};
    Real residual{0.};
    Real model{0.};  //!< m(p)
    std::vector<KrylovIterate> trace{};
  };

  namespace detail {
    inline void axpy(Real a, const Vector & x, Vector & y) {
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
    }

    //! nonnegative tau with |z + tau d| = R, stable root formula
    inline Real boundary_step(const Vector & z, const Vector & d, Real radius) {
      const Real dd = euclid_dot(d, d);
      const Real zd = euclid_dot(z, d);
      const Real gap = std::max(0., radius * radius - euclid_dot(z, z));
      if (dd == 0. || gap == 0.) return 0.;
      const Real disc = std::sqrt(zd * zd + dd * gap);
      return zd > 0. ? gap / (zd + disc) : (disc - zd) / dd;
    }
  }  // namespace detail

  /**
   * CG-Steihaug with reset. `apply_a(x, y)` writes A x into y (y has the
   * size of x). R = +inf gives unconstrained CG that stops at the current
   * iterate on non-positive curvature.
   */
  template <class Op>
  SubproblemResult cg_steihaug(const Op & apply_a, const Vector & b, Real radius,
                               const KrylovConfig & cfg) {
    cfg.validate();
    if (!(radius > 0.)) throw KrylovError("cg_steihaug: radius must be positive");
    const std::size_t n = b.size();
    SubproblemResult res;
    res.p.assign(n, 0.);

    const Real bnorm = euclid_norm(b);
    const Real tol = cfg.relative ? cfg.eta_cg * bnorm : cfg.eta_cg;
    res.residual = bnorm;
    if (bnorm <= tol || bnorm == 0.) {
      res.termination = Termination::Converged;
      return res;
    }

    Vector & z = res.p;
    Vector g(b.size());
    for (std::size_t i = 0; i < n; ++i) g[i] = -b[i];
    Vector d = b;
    Vector ad(n, 0.);
    Vector g_new(n, 0.);
    Real gg = euclid_dot(g, g);
    Real model{0.};
    const Index cap = cfg.iteration_cap(static_cast<Index>(n));

    auto finish_on_boundary = [&](Termination why, Real gd, Real dad) {
      const Real tau = std::isinf(radius) ? 0. : detail::boundary_step(z, d, radius);
      detail::axpy(tau, d, z);
      res.model = model + tau * gd + 0.5 * tau * tau * dad;
      res.termination = why;
    };

    for (Index j = 0; j < cap; ++j) {
      apply_a(d, ad);
      const Real dad = euclid_dot(d, ad);
      if (!std::isfinite(dad)) throw KrylovError("cg_steihaug: non-finite operator output");
      const Real gd = euclid_dot(g, d);
      res.iterations = j + 1;
      if (dad <= 0.) {
        finish_on_boundary(Termination::NegativeCurvature, gd, dad);
        return res;
      }
      const Real a = gg / dad;
      // |z + a d|^2 without forming the vector
      const Real zz = euclid_dot(z, z);
      const Real zd = euclid_dot(z, d);
      const Real dd = euclid_dot(d, d);
      const Real next_norm2 = zz + 2. * a * zd + a * a * dd;
      if (next_norm2 >= radius * radius) {
        finish_on_boundary(Termination::BoundaryHit, gd, dad);
        return res;
      }
      detail::axpy(a, d, z);
      model += a * gd + 0.5 * a * a * dad;
      g_new = g;
      detail::axpy(a, ad, g_new);
      Real gg_new = euclid_dot(g_new, g_new);
      res.residual = std::sqrt(gg_new);
      KrylovIterate it{j, res.residual, model, std::sqrt(next_norm2), false};
      if (res.residual <= tol) {
        res.trace.push_back(it);
        res.model = model;
        res.termination = Termination::Converged;
        return res;
      }
      Real beta{0.};
      if (std::abs(euclid_dot(g_new, g)) / gg_new > cfg.reset_threshold) {
        // successive residuals lost orthogonality: true residual, steepest descent
        apply_a(z, g_new);
        for (std::size_t i = 0; i < n; ++i) g_new[i] -= b[i];
        gg_new = euclid_dot(g_new, g_new);
        res.residual = std::sqrt(gg_new);
        ++res.resets;
        it.reset = true;
        it.residual = res.residual;
      } else {
        beta = gg_new / gg;
      }
      res.trace.push_back(it);
      for (std::size_t i = 0; i < n; ++i) d[i] = -g_new[i] + beta * d[i];
      std::swap(g, g_new);
      gg = gg_new;
    }
    res.model = model;
    res.termination = Termination::MaxIter;
    return res;
  }

  //! appends the per-iteration trace as CSV rows: solve,j,residual,model,reset,termination
  inline void write_trace_csv(std::ostream & out, Index solve_id, const SubproblemResult & r) {
    for (const auto & it : r.trace) {
      out << solve_id << ',' << it.j << ',' << it.residual << ',' << it.model << ','
          << (it.reset ? 1 : 0) << ',' << to_string(r.termination) << '\n';
    }
  }

}  // namespace homog
