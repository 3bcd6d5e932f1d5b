/**
 * @file   spring1d.hpp
 *
 * @brief  Three-node periodic spring ring with one bilinear damage spring:
 *         energy, force and stiffness on the reduced two-DOF space, and a
 *         harness comparing Newton-CG, the standard trust region (explicit
 *         energy) and the modified trust region (incremental energy).
 *
 * Unknowns are the elongations of the damage spring (x0) and of spring 1
 * (x1); periodicity fixes spring 2 at 3 xbar - x0 - x1.
 */
#pragma once

#include "homog/krylov.hpp"
#include "homog/solver.hpp"

#include <Eigen/Dense>

#include <array>
#include <ostream>

namespace homog::spring {

  using Vec2 = Eigen::Vector2d;
  using Mat2 = Eigen::Matrix2d;

  struct SpringSystem {
    Real k{1.};
    Real alpha{1.};  //!< post-peak tangent of the damage spring is alpha k
    Real gamma0{0.1};
    Real xbar{0.11};

    void validate() const {
      if (!(k > 0.) || !(gamma0 > 0.) || !std::isfinite(alpha) || !std::isfinite(xbar)) {
        throw std::invalid_argument("spring system: need k > 0, gamma0 > 0, finite alpha, xbar");
      }
    }

    //! elongation at which a softening spring carries no force (inf otherwise)
    Real rupture() const {
      return alpha < 0. ? gamma0 * (1. - 1. / alpha) : std::numeric_limits<Real>::infinity();
    }

    //! damage spring: energy, force, tangent at elongation x
    std::array<Real, 3> damage_spring(Real x) const {
      if (x <= gamma0) return {0.5 * k * x * x, k * x, k};
      const Real xr = this->rupture();
      const Real peak = 0.5 * k * gamma0 * gamma0;
      if (x < xr) {
        const Real d = x - gamma0;
        return {peak + k * gamma0 * d + 0.5 * alpha * k * d * d, k * gamma0 + alpha * k * d,
                alpha * k};
      }
      const Real d = xr - gamma0;
      return {peak + k * gamma0 * d + 0.5 * alpha * k * d * d, 0., 0.};
    }

    //! elongation of spring 2
    Real closing(const Vec2 & x) const { return 3. * xbar - x(0) - x(1); }
  };

  struct Evaluation {
    Real energy{0.};
    Vec2 force{Vec2::Zero()};  //!< gradient of the energy
    Mat2 stiffness{Mat2::Zero()};
  };

  inline Evaluation spring_eval(const SpringSystem & s, const Vec2 & x) {
    if (!x.allFinite()) throw std::invalid_argument("spring_eval: non-finite dof");
    const auto [w0, f0, k0] = s.damage_spring(x(0));
    const Real x2 = s.closing(x);
    Evaluation e;
    e.energy = w0 + 0.5 * s.k * x(1) * x(1) + 0.5 * s.k * x2 * x2;
    e.force = Vec2{f0 - s.k * x2, s.k * x(1) - s.k * x2};
    e.stiffness << k0 + s.k, s.k, s.k, 2. * s.k;
    return e;
  }

  /**
   * Node-space stiffness of the ring with the damage spring between nodes 0
   * and 1 at post-peak tangent alpha k, springs 1 (nodes 1-2) and 2 (2-0).
   */
  inline Eigen::Matrix3d post_peak_stiffness(const SpringSystem & s) {
    const Real a = s.alpha * s.k, k = s.k;
    Eigen::Matrix3d m;
    m << a + k, -a, -k,  //
        -a, a + k, -k,   //
        -k, -k, 2. * k;
    return m;
  }

  /* ---------------------------------------------------------------------- */
  enum class Method { NewtonCG, StandardTR, ModifiedTR };

  inline const char * to_string(Method m) {
    switch (m) {
      case Method::NewtonCG: return "newton_cg";
      case Method::StandardTR: return "standard_tr";
      case Method::ModifiedTR: return "modified_tr";
    }
    return "?";
  }

  struct SolveConfig {
    Real R0{1.};
    Real Rmax{1.};
    Real eta_up{0.};
    Real eta_eq{1e-12};  //!< absolute gradient norm
    Index max_newton{200};
    Index max_rejections{50};
    KrylovConfig krylov{1e-14, false, 10, 0.2};
  };

  struct Iterate {
    Vec2 x{Vec2::Zero()};
    Real energy{0.};
    Real gradient_norm{0.};
    Real radius{0.};
    Real rho{0.};
    bool accepted{true};
  };

  struct SolveResult {
    Vec2 x{Vec2::Zero()};
    bool converged{false};
    std::string status{};
    std::vector<Iterate> trajectory{};  //!< every trial, starting with the initial point
    Index newton_iters{0};
    Real min_hessian_eigenvalue{std::numeric_limits<Real>::infinity()};
  };

  //! FAIEF for the spring ring: trapezoid of the end-point forces against p
  inline Real faief(const SpringSystem & s, const Vec2 & x, const Vec2 & p) {
    return 0.5 * (spring_eval(s, x).force + spring_eval(s, x + p).force).dot(p);
  }

  inline Real exact_delta(const SpringSystem & s, const Vec2 & x, const Vec2 & p) {
    return spring_eval(s, x + p).energy - spring_eval(s, x).energy;
  }

  inline SolveResult spring_solve(const SpringSystem & s, Vec2 x, Method method,
                                  const SolveConfig & cfg = {}) {
    s.validate();
    SolveResult res;
    TrustRegionConfig tr;
    tr.shrink_factor = 0.25;
    tr.eta_up = cfg.eta_up;
    Real radius = method == Method::NewtonCG ? std::numeric_limits<Real>::infinity() : cfg.R0;
    Evaluation ev = spring_eval(s, x);
    res.trajectory.push_back({x, ev.energy, ev.force.norm(), radius, 0., true});
    Index rejections{0};

    for (Index it = 0; it < cfg.max_newton; ++it) {
      if (ev.force.norm() <= cfg.eta_eq) {
        res.converged = true;
        res.status = "converged";
        break;
      }
      res.min_hessian_eigenvalue = std::min(
          res.min_hessian_eigenvalue, Eigen::SelfAdjointEigenSolver<Mat2>(ev.stiffness).eigenvalues()(0));
      const Mat2 h = ev.stiffness;
      auto op = [&h](const Vector & in, Vector & out) {
        const Vec2 r = h * Vec2{in[0], in[1]};
        out = {r(0), r(1)};
      };
      const Vector b{-ev.force(0), -ev.force(1)};
      const SubproblemResult sub = cg_steihaug(op, b, radius, cfg.krylov);
      ++res.newton_iters;
      const Vec2 p{sub.p[0], sub.p[1]};

      if (method == Method::NewtonCG) {
        if (sub.termination == Termination::NegativeCurvature) {
          res.status = "indefinite";
          break;
        }
        x += p;
        ev = spring_eval(s, x);
        res.trajectory.push_back({x, ev.energy, ev.force.norm(), radius, 1., true});
        if (!std::isfinite(ev.energy)) {
          res.status = "diverged";
          break;
        }
        continue;
      }

      // predicted reduction m(0) - m(p)
      const Real dm = -ev.force.dot(p) - 0.5 * p.dot(h * p);
      const Real change =
          method == Method::StandardTR ? exact_delta(s, x, p) : faief(s, x, p);
      const Real rho = dm > 0. ? -change / dm : -std::numeric_limits<Real>::infinity();
      const Real step_norm = p.norm();
      const Real used = radius;
      radius = update_radius(rho, radius, step_norm, tr, cfg.Rmax);
      const bool accept = rho > cfg.eta_up;
      const Vec2 trial = x + p;
      const Evaluation et = spring_eval(s, trial);
      res.trajectory.push_back({trial, et.energy, et.force.norm(), used, rho, accept});
      if (!accept) {
        if (++rejections >= cfg.max_rejections) {
          res.status = "stagnation";
          break;
        }
        continue;
      }
      rejections = 0;
      x = trial;
      ev = et;
    }
    if (res.status.empty()) res.status = res.converged ? "converged" : "max_newton";
    res.x = x;
    return res;
  }

  /**
   * Energy slice W(x0, argmin over x1), the quantity plotted against x0.
   * For fixed x0 the energy is quadratic in x1 with minimiser (3 xbar - x0)/2.
   */
  inline Real landscape(const SpringSystem & s, Real x0) {
    return spring_eval(s, Vec2{x0, 0.5 * (3. * s.xbar - x0)}).energy;
  }

  inline void write_landscape_csv(std::ostream & out, const SpringSystem & s, Real lo, Real hi,
                                  Index n) {
    out << "x0,energy\n";
    out.precision(17);
    for (Index i = 0; i < n; ++i) {
      const Real x0 = lo + (hi - lo) * static_cast<Real>(i) / static_cast<Real>(n - 1);
      out << x0 << ',' << landscape(s, x0) << '\n';
    }
  }

  inline void write_trajectory_csv(std::ostream & out, const SolveResult & r) {
    out << "iterate,x0,x1,energy,gradient_norm,radius,rho,accepted\n";
    out.precision(17);
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
      const auto & t = r.trajectory[i];
      out << i << ',' << t.x(0) << ',' << t.x(1) << ',' << t.energy << ',' << t.gradient_norm
          << ',' << t.radius << ',' << t.rho << ',' << (t.accepted ? 1 : 0) << '\n';
    }
  }

  /**
   * Step-halving ratios e(t)/e(t/2) of e(t) = |FAIEF(t p) - dW(t p)| from
   * x along direction p, starting at t = 1.
   */
  inline std::vector<Real> faief_halving_ratios(const SpringSystem & s, const Vec2 & x,
                                                const Vec2 & p, Index halvings) {
    std::vector<Real> errors;
    Real t = 1.;
    for (Index i = 0; i <= halvings; ++i, t *= 0.5) {
      errors.push_back(std::abs(faief(s, x, t * p) - exact_delta(s, x, t * p)));
    }
    std::vector<Real> ratios;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
      ratios.push_back(errors[i + 1] > 0. ? errors[i] / errors[i + 1]
                                          : std::numeric_limits<Real>::quiet_NaN());
    }
    return ratios;
  }

}  // namespace homog::spring
