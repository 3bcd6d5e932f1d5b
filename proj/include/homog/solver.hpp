/**
 * @file   solver.hpp
 *
 * @brief  Nonlinear drivers for the cell problem: plain Newton-CG and the
 *         trust-region Newton-CG whose acceptance ratio compares the model
 *         decrease with the first-order incremental energy change
 *         dW = (sigma_prev + sigma_trial)/2 : p, so no strain energy
 *         functional is ever evaluated.
 */
#pragma once

#include "homog/homogenization.hpp"

#include <functional>
#include <ostream>
#include <string>

namespace homog {

  class SolverError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  enum class ResidualNorm { Rms, Absolute };

  struct TrustRegionConfig {
    //! 0 selects 0.1 sqrt(n) |load increment|
    Real R0{0.};
    //! 0 selects 100 R0
    Real Rmax{0.};
    Real eta_up{0.};
    Real shrink_factor{0.25};
    Real shrink_trigger{0.25};
    Real expand_trigger{0.75};
    Real expand_factor{2.};
    Real eta_eq{1e-8};
    ResidualNorm residual_norm{ResidualNorm::Rms};
    Real eta_nr{1e-9};
    Index max_newton{200};
    Index max_rejections{50};
    KrylovConfig krylov{};

    void validate() const {
      if (R0 < 0. || Rmax < 0. || (R0 > 0. && Rmax > 0. && R0 > Rmax)) {
        throw SolverError("trust region: need 0 < R0 <= Rmax");
      }
      if (!(eta_up >= 0. && eta_up < shrink_trigger)) {
        throw SolverError("trust region: need 0 <= eta_up < shrink trigger");
      }
      if (!(eta_eq > 0.) || !(eta_nr > 0.)) {
        throw SolverError("trust region: tolerances must be positive");
      }
      if (max_newton < 1) throw SolverError("trust region: max_newton must be >= 1");
      krylov.validate();
    }
  };

  struct StepOutcome {
    Real rho_bar{0.};
    bool accepted{false};
    Real delta_m{0.};  //!< predicted reduction m(0) - m(p) [J]
    Real delta_W_bar{0.};  //!< approximate energy change [J]
    Real new_radius{0.};
  };

  struct LoadStepReport {
    Index step{0};
    Index newton_iters{0};
    Index cg_iters_total{0};
    Index rejections{0};
    Real final_residual{0.};
    std::vector<Real> radius_history{};
    bool converged{false};
    std::string status{"pending"};
  };

  struct ConvergenceReport {
    std::string method{};
    std::vector<LoadStepReport> steps{};
    bool converged{true};
    std::string status{"converged"};
    //! QP fields the driver keeps alive besides the cell's own
    Index persistent_fields{0};

    Index total_newton() const {
      Index n{0};
      for (const auto & s : steps) n += s.newton_iters;
      return n;
    }
    Index total_cg() const {
      Index n{0};
      for (const auto & s : steps) n += s.cg_iters_total;
      return n;
    }
  };

  /* ---------------------------------------------------------------------- */
  /**
   * Trapezoidal incremental energy: ((sigma_prev + sigma_trial)/2) : p,
   * summed with quadrature weights.
   */
  inline Real faief_delta(const QPField & sigma_prev, const QPField & sigma_trial,
                          const QPField & p) {
    QPField::check_same(sigma_prev, sigma_trial);
    QPField::check_same(sigma_prev, p);
    return 0.5 * (field_inner(sigma_prev, p) + field_inner(sigma_trial, p));
  }

  /**
   * Predicted reduction m(0) - m(p) = -sigma:p - 1/2 p:B:p. `apply_b(p, out)`
   * writes B:p. Throws when the result is negative beyond round-off.
   */
  template <class ApplyB>
  Real model_decrease(const QPField & sigma_prev, const ApplyB & apply_b, const QPField & p,
                      bool strict = true) {
    QPField bp(p.shape(), 2);
    apply_b(p, bp);
    const Real lin = field_inner(sigma_prev, p);
    const Real quad = field_inner(p, bp);
    const Real dm = -lin - 0.5 * quad;
    const Real roundoff = 1e-12 * (std::abs(lin) + 0.5 * std::abs(quad));
    if (strict && dm < -roundoff) {
      throw SolverError("model_decrease: negative predicted reduction (inconsistent operator)");
    }
    return dm;
  }

  /**
   * rho < shrink_trigger: R * shrink_factor; rho > expand_trigger with the
   * step on the boundary: min(expand_factor R, Rmax); otherwise unchanged.
   */
  inline Real update_radius(Real rho_bar, Real radius, Real step_norm,
                            const TrustRegionConfig & cfg, Real rmax) {
    if (rho_bar < cfg.shrink_trigger) return cfg.shrink_factor * radius;
    if (rho_bar > cfg.expand_trigger && std::abs(step_norm - radius) <= 1e-10 * radius) {
      return std::min(cfg.expand_factor * radius, rmax);
    }
    return radius;
  }

  inline Real update_radius(Real rho_bar, Real radius, Real step_norm,
                            const TrustRegionConfig & cfg) {
    return update_radius(rho_bar, radius, step_norm, cfg,
                         cfg.Rmax > 0. ? cfg.Rmax : std::numeric_limits<Real>::infinity());
  }

  /* ---------------------------------------------------------------------- */
  enum class SolverMethod { NewtonCG, TrustRegion };

  inline const char * to_string(SolverMethod m) {
    return m == SolverMethod::NewtonCG ? "newton_cg" : "trust_region";
  }

  struct NewtonTraceRow {
    Index step{0};
    Index iteration{0};
    Real residual{0.};
    Real radius{0.};
    Real rho_bar{0.};
    bool accepted{true};
    Index cg_iters{0};
    Termination termination{Termination::Converged};
    Real step_norm{0.};
    Real delta_m{0.};
    Real delta_W_bar{0.};
    bool cauchy{false};  //!< the Steihaug step was replaced by the Cauchy point
  };

  /**
   * Stateful driver: keeps the trust radius across load increments and the
   * stress of the last accepted state (the only extra field the trust-region
   * variant needs).
   */
  class CellSolver {
   public:
    using TraceSink = std::function<void(const NewtonTraceRow &)>;

    CellSolver(Cell & cell, SolverMethod method, TrustRegionConfig cfg)
        : cell_{cell}, method_{method}, cfg_{std::move(cfg)} {
      cfg_.validate();
      report_.method = to_string(method);
      // b, the Newton step and two operator work fields; the trust region
      // adds the trial stress
      report_.persistent_fields = method == SolverMethod::TrustRegion ? 5 : 4;
    }

    void set_trace(TraceSink sink) { trace_ = std::move(sink); }
    const ConvergenceReport & report() const { return report_; }
    Real radius() const { return radius_; }

    Real residual_norm(const QPField & b) const {
      const Real n = euclid_norm(b);
      return cfg_.residual_norm == ResidualNorm::Rms
                 ? n / std::sqrt(static_cast<Real>(b.size()))
                 : n;
    }

    //! applies one load increment and iterates to equilibrium
    LoadStepReport solve_increment(const LoadIncrement & inc) {
      const Index step_id = static_cast<Index>(report_.steps.size());
      cell_.apply_increment(inc);
      if (radius_ == 0.) this->init_radius(inc);
      LoadStepReport rep = method_ == SolverMethod::TrustRegion ? this->trust_region(step_id)
                                                                : this->newton(step_id);
      rep.step = step_id;
      if (!rep.converged) {
        report_.converged = false;
        if (report_.status == "converged") report_.status = rep.status;
      }
      report_.steps.push_back(rep);
      return rep;
    }

    ConvergenceReport solve(const LoadProgram & program) {
      program.validate();
      for (const auto & inc : program.increments) {
        const auto rep = this->solve_increment(inc);
        if (!rep.converged) break;
      }
      return report_;
    }

   private:
    void init_radius(const LoadIncrement & inc) {
      Real magnitude = inc.value.norm();
      if (inc.kind == LoadKind::MeanStress) {
        Real stiff{0.};
        for (const auto & m : cell_.materials()) {
          stiff = std::max(stiff, std::visit([](const auto & x) { return x.young; }, m));
        }
        magnitude /= stiff;
      }
      const auto n = static_cast<Real>(cell_.strain().size());
      radius_ = cfg_.R0 > 0. ? cfg_.R0 : 0.1 * std::sqrt(n) * magnitude;
      if (!(radius_ > 0.)) radius_ = 1e-3 * std::sqrt(n);
      rmax_ = cfg_.Rmax > 0. ? cfg_.Rmax : 100. * radius_;
      radius_ = std::min(radius_, rmax_);
    }

    auto system_operator() {
      return [this](const Vector & in, Vector & out) {
        work_in_.values() = in;
        cell_.apply_system(work_in_, work_out_);
        out = work_out_.values();
      };
    }

    //! minimiser of the model along -grad within the radius; grad = G:(sigma - target)
    void cauchy_point(const QPField & grad, QPField & step) {
      step = grad;
      step *= -1.;
      cell_.apply_tangent(step, work_out_);
      const Real gg = euclid_dot(step.values(), step.values());
      const Real gbg = euclid_dot(step.values(), work_out_.values());
      const Real gnorm = std::sqrt(gg);
      Real tau = gnorm > 0. ? radius_ / gnorm : 0.;
      if (gbg > 0.) tau = std::min(tau, gg / gbg);
      step *= tau;
    }

    bool relative_step_small(const QPField & step) const {
      const Real en = euclid_norm(cell_.strain());
      if (en < 1e-14) return false;
      return euclid_norm(step) / en <= cfg_.eta_nr;
    }

    void emit(const NewtonTraceRow & row) {
      if (trace_) trace_(row);
    }

    LoadStepReport newton(Index step_id) {
      LoadStepReport rep;
      const GridShape & g = cell_.grid();
      work_in_ = QPField(g, 2);
      work_out_ = QPField(g, 2);
      cell_.evaluate_current();
      QPField b = cell_.assemble_rhs();
      rep.final_residual = this->residual_norm(b);
      if (rep.final_residual <= cfg_.eta_eq) {
        cell_.commit();
        rep.converged = true;
        rep.status = "converged";
        return rep;
      }
      const Real inf = std::numeric_limits<Real>::infinity();
      QPField step(g, 2);
      for (Index it = 0; it < cfg_.max_newton; ++it) {
        SubproblemResult sub = cg_steihaug(this->system_operator(), b.values(), inf, cfg_.krylov);
        rep.cg_iters_total += sub.iterations;
        ++rep.newton_iters;
        if (sub.termination == Termination::NegativeCurvature) {
          rep.status = "indefinite";
          this->emit({step_id, it, rep.final_residual, inf, 0., false, sub.iterations,
                      sub.termination});
          return rep;
        }
        step.values() = std::move(sub.p);
        cell_.strain() += step;
        cell_.evaluate_current();
        cell_.commit();
        b = cell_.assemble_rhs();
        rep.final_residual = this->residual_norm(b);
        this->emit({step_id, it, rep.final_residual, inf, 1., true, sub.iterations,
                    sub.termination});
        if (!std::isfinite(rep.final_residual)) {
          rep.status = "diverged";
          return rep;
        }
        if (rep.final_residual <= cfg_.eta_eq || this->relative_step_small(step)) {
          rep.converged = true;
          rep.status = "converged";
          return rep;
        }
      }
      rep.status = "max_newton";
      return rep;
    }

    LoadStepReport trust_region(Index step_id) {
      LoadStepReport rep;
      const GridShape & g = cell_.grid();
      work_in_ = QPField(g, 2);
      work_out_ = QPField(g, 2);
      cell_.evaluate_current();
      QPField b = cell_.assemble_rhs();
      rep.final_residual = this->residual_norm(b);
      rep.radius_history.push_back(radius_);
      if (rep.final_residual <= cfg_.eta_eq) {
        cell_.commit();
        rep.converged = true;
        rep.status = "converged";
        return rep;
      }
      QPField step(g, 2);
      QPField sigma_trial(g, 2);
      Index consecutive_rejections{0};
      auto apply_b = [this](const QPField & x, QPField & out) { cell_.apply_tangent(x, out); };

      for (Index it = 0; it < cfg_.max_newton; ++it) {
        SubproblemResult sub =
            cg_steihaug(this->system_operator(), b.values(), radius_, cfg_.krylov);
        rep.cg_iters_total += sub.iterations;
        ++rep.newton_iters;
        step.values() = std::move(sub.p);

        // steps lie in the range of G, so sigma:p = (G sigma):p; contracting
        // the projected stresses avoids cancellation once |b| << |sigma|
        StepOutcome out;
        b *= -1.;
        out.delta_m = model_decrease(b, apply_b, step, false);
        bool cauchy = false;
        if (!(out.delta_m > 0.)) {
          // with a non-symmetric tangent the Steihaug point can raise the
          // model; the Cauchy point never does
          cauchy = true;
          this->cauchy_point(b, step);
          out.delta_m = model_decrease(b, apply_b, step, false);
        }
        const Real step_norm = euclid_norm(step);
        cell_.evaluate_shifted(cell_.strain(), &step, sigma_trial, nullptr);
        cell_.subtract_stress_target(sigma_trial);
        cell_.projection().apply(sigma_trial, sigma_trial);
        out.delta_W_bar = faief_delta(b, sigma_trial, step);
        b *= -1.;

        const Real roundoff =
            1e-12 * (std::abs(field_inner(b, step)) + std::abs(out.delta_m));
        if (out.delta_m > roundoff) {
          out.rho_bar = -out.delta_W_bar / out.delta_m;
        } else {
          // no predicted decrease: the step carries no information
          out.rho_bar = -std::numeric_limits<Real>::infinity();
        }
        if (!std::isfinite(out.delta_W_bar)) out.rho_bar = -std::numeric_limits<Real>::infinity();
        out.new_radius = update_radius(out.rho_bar, radius_, step_norm, cfg_, rmax_);
        out.accepted = out.rho_bar > cfg_.eta_up;
        const Real radius_used = radius_;
        radius_ = out.new_radius;
        rep.radius_history.push_back(radius_);

        if (!out.accepted) {
          cell_.discard_trial();
          ++rep.rejections;
          this->emit({step_id, it, rep.final_residual, radius_used, out.rho_bar, false,
                      sub.iterations, sub.termination, step_norm, out.delta_m,
                      out.delta_W_bar, cauchy});
          if (++consecutive_rejections >= cfg_.max_rejections) {
            rep.status = "stagnation";
            return rep;
          }
          continue;
        }
        consecutive_rejections = 0;
        cell_.strain() += step;
        cell_.commit();
        cell_.evaluate_current();
        b = cell_.assemble_rhs();
        rep.final_residual = this->residual_norm(b);
        this->emit({step_id, it, rep.final_residual, radius_used, out.rho_bar, true,
                    sub.iterations, sub.termination, step_norm, out.delta_m, out.delta_W_bar,
                    cauchy});
        if (!std::isfinite(rep.final_residual)) {
          rep.status = "diverged";
          return rep;
        }
        const bool interior = step_norm < radius_used * (1. - 1e-10);
        if (interior &&
            (rep.final_residual <= cfg_.eta_eq || this->relative_step_small(step))) {
          rep.converged = true;
          rep.status = "converged";
          return rep;
        }
      }
      rep.status = "max_newton";
      return rep;
    }

    Cell & cell_;
    SolverMethod method_;
    TrustRegionConfig cfg_;
    ConvergenceReport report_{};
    Real radius_{0.};
    Real rmax_{0.};
    QPField work_in_{};
    QPField work_out_{};
    TraceSink trace_{};
  };

  inline ConvergenceReport trust_region_solve(Cell & cell, const LoadProgram & program,
                                              const TrustRegionConfig & cfg) {
    CellSolver s(cell, SolverMethod::TrustRegion, cfg);
    return s.solve(program);
  }

  inline ConvergenceReport newton_cg_solve(Cell & cell, const LoadProgram & program,
                                           const TrustRegionConfig & cfg) {
    CellSolver s(cell, SolverMethod::NewtonCG, cfg);
    return s.solve(program);
  }

  inline void write_trace_header(std::ostream & out) {
    out << "step,iteration,residual,radius,rho_bar,accepted,cg_iters,termination,step_norm,"
           "delta_m,delta_W_bar,cauchy\n";
  }

  inline void write_trace_row(std::ostream & out, const NewtonTraceRow & r) {
    out << r.step << ',' << r.iteration << ',' << r.residual << ',' << r.radius << ','
        << r.rho_bar << ',' << (r.accepted ? 1 : 0) << ',' << r.cg_iters << ','
        << to_string(r.termination) << ',' << r.step_norm << ',' << r.delta_m << ','
        << r.delta_W_bar << ',' << (r.cauchy ? 1 : 0) << '\n';
  }

}  // namespace homog
