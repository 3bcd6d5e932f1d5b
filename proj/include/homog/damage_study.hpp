/**
 * @file   damage_study.hpp
 *
 * @brief  Gel-expansion damage runs: builds a regularised three-phase cell
 *         from a microstructure and follows the stiffness degradation along
 *         an eigenstrain ramp under zero mean stress.
 */
#pragma once

#include "homog/microstructure.hpp"
#include "homog/solver.hpp"

#include <ostream>

namespace homog {

  struct PhaseProperties {
    Real young{1.};
    Real poisson{0.3};
    Real fracture_energy{0.};  //!< [J/m^2]; 0 marks a linear elastic phase
    Real tensile_strength{0.};  //!< [Pa]
  };

  //! aggregate, cement paste and gel properties used by the expansion runs
  struct ConcreteProperties {
    PhaseProperties paste{12e9, 0.3, 60., 3e6};
    PhaseProperties aggregate{59e9, 0.3, 160., 10e6};
    PhaseProperties gel{11e9, 0.18, 0., 0.};
  };

  inline Material make_material(const PhaseProperties & p, Real element_size) {
    if (p.fracture_energy > 0.) {
      return make_regularized_damage(p.young, p.poisson, p.fracture_energy, p.tensile_strength,
                                     element_size);
    }
    LinearElastic e{p.young, p.poisson};
    e.validate();
    return e;
  }

  /**
   * Cell for an expansion run: phases indexed as Paste/Aggregate/Gel, crack
   * band width equal to the pixel size, gel pixels carry the eigenstrain.
   */
  inline Cell make_damage_cell(const Microstructure & m, const ConcreteProperties & props,
                               DerivativeScheme scheme = DerivativeScheme::LinearFE,
                               ZeroFrequencyMode bc = ZeroFrequencyMode::StressControl) {
    const Real h = std::min(m.grid.hx(), m.grid.hy());
    std::vector<Material> mats(3);
    mats[Paste] = make_material(props.paste, h);
    mats[Aggregate] = make_material(props.aggregate, h);
    mats[Gel] = make_material(props.gel, h);
    return Cell(m.grid, scheme, m.phase, std::move(mats), bc, m.gel_mask());
  }

  struct DegradationRow {
    Index step{0};
    Real sum_eigenstrain{0.};
    Real stiffness_ratio{1.};
    Index damaged_qp_count{0};
    Index newton_iters{0};
    Index cg_iters{0};
  };

  struct DegradationCurve {
    std::vector<DegradationRow> rows{};
    Real intact_norm{0.};
    ConvergenceReport report{};
    bool complete{true};
    std::string status{"converged"};
  };

  /**
   * Applies `steps` volumetric eigenstrain increments of size `increment`
   * (both normal components) to the gel pixels of a stress-controlled cell
   * at zero mean stress, solving with the trust-region driver after each.
   * A failed increment ends the ramp and the partial curve is returned.
   * `trace`, when set, receives every Newton iteration.
   */
  template <class RowSink = std::nullptr_t>
  DegradationCurve run_damage_study(Cell & cell, Real increment, Index steps,
                                    const TrustRegionConfig & cfg,
                                    SolverMethod method = SolverMethod::TrustRegion,
                                    RowSink on_row = nullptr,
                                    CellSolver::TraceSink trace = {}) {
    if (cell.bc_mode() != ZeroFrequencyMode::StressControl) {
      throw CellError("run_damage_study: needs a stress-controlled (free expansion) cell");
    }
    if (!(increment > 0.) || steps < 1) throw CellError("run_damage_study: empty ramp");

    DegradationCurve curve;
    curve.intact_norm = effective_stiffness(cell, cfg.krylov).norm;
    auto emit = [&](const DegradationRow & row) {
      curve.rows.push_back(row);
      if constexpr (!std::is_same_v<RowSink, std::nullptr_t>) on_row(row);
    };
    emit(DegradationRow{});

    CellSolver solver(cell, method, cfg);
    if (trace) solver.set_trace(std::move(trace));
    const LoadIncrement inc{LoadKind::Eigenstrain, Mandel{increment, increment, 0.}};
    for (Index s = 1; s <= steps; ++s) {
      const LoadStepReport rep = solver.solve_increment(inc);
      if (!rep.converged) {
        curve.complete = false;
        curve.status = rep.status;
        break;
      }
      const EffectiveStiffness es = effective_stiffness(cell, cfg.krylov);
      emit(DegradationRow{s, static_cast<Real>(s) * increment, es.norm / curve.intact_norm,
                          cell.damaged_qp_count(), rep.newton_iters, rep.cg_iters_total});
    }
    curve.report = solver.report();
    return curve;
  }

  inline void write_degradation_csv(std::ostream & out, const DegradationCurve & c) {
    out << "step,sum_eigenstrain,stiffness_ratio,damaged_qp_count,newton_iters,cg_iters\n";
    out.precision(17);
    for (const auto & r : c.rows) {
      out << r.step << ',' << r.sum_eigenstrain << ',' << r.stiffness_ratio << ','
          << r.damaged_qp_count << ',' << r.newton_iters << ',' << r.cg_iters << '\n';
    }
  }

}  // namespace homog
