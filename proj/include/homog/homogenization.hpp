/**
 * @file   homogenization.hpp
 *
 * @brief  The periodic cell problem: microstructure and material
 *         assignment, mean strain or mean stress control, eigenstrains,
 *         the projected residual and the matrix-free action G:B:(.), and
 *         effective stiffness extraction.
 */
#pragma once

#include "homog/fft_projection.hpp"
#include "homog/krylov.hpp"
#include "homog/materials.hpp"

#include <cstdint>
#include <optional>

namespace homog {

  class CellError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
  };

  enum class LoadKind { MeanStrain, MeanStress, Eigenstrain };

  struct LoadIncrement {
    LoadKind kind{LoadKind::MeanStrain};
    Mandel value{Mandel::Zero()};
  };

  struct LoadProgram {
    std::vector<LoadIncrement> increments{};

    void validate() const {
      if (increments.empty()) throw CellError("load program is empty");
      for (const auto & inc : increments) {
        if (!inc.value.allFinite()) throw CellError("load increment is not finite");
      }
    }

    static LoadProgram constant(LoadKind kind, const Mandel & step, Index count) {
      LoadProgram p;
      p.increments.assign(static_cast<std::size_t>(count), LoadIncrement{kind, step});
      return p;
    }
  };

  /**
   * A periodic cell. Strain, stress and tangent live on the quadrature
   * points; damage history is per quadrature point. The strain field holds
   * the total strain (mean + fluctuation), eigenstrains are added before
   * constitutive evaluation.
   */
  class Cell {
   public:
    Cell(const GridShape & grid, DerivativeScheme scheme, std::vector<int> phase,
         std::vector<Material> materials, ZeroFrequencyMode bc,
         std::vector<std::uint8_t> eigen_mask = {})
        : scheme_{scheme}, phase_{std::move(phase)}, materials_{std::move(materials)},
          eigen_mask_{std::move(eigen_mask)} {
      const DerivativeOperator d = build_derivative(scheme, grid);
      grid_ = d.shape;
      projection_ = build_projection(d, bc);
      if (static_cast<Index>(phase_.size()) != grid_.pixels()) {
        throw CellError("phase map size does not match the grid");
      }
      for (int id : phase_) {
        if (id < 0 || id >= static_cast<int>(materials_.size())) {
          throw CellError("pixel without material (phase id " + std::to_string(id) + ")");
        }
      }
      for (const auto & m : materials_) std::visit([](const auto & x) { x.validate(); }, m);
      if (eigen_mask_.empty()) eigen_mask_.assign(phase_.size(), 0);
      if (eigen_mask_.size() != phase_.size()) {
        throw CellError("eigenstrain mask size does not match the grid");
      }
      eps_ = QPField(grid_, 2);
      eps_eig_ = QPField(grid_, 2);
      sigma_ = QPField(grid_, 2);
      tangent_ = QPField(grid_, 4);
      state_ = DamageState(grid_.quad_points());
    }

    const GridShape & grid() const { return grid_; }
    DerivativeScheme scheme() const { return scheme_; }
    const ProjectionOperator & projection() const { return projection_; }
    ZeroFrequencyMode bc_mode() const { return projection_.zero_freq_mode(); }
    const std::vector<int> & phase() const { return phase_; }
    const std::vector<Material> & materials() const { return materials_; }
    const std::vector<std::uint8_t> & eigen_mask() const { return eigen_mask_; }

    QPField & strain() { return eps_; }
    const QPField & strain() const { return eps_; }
    const QPField & eigenstrain() const { return eps_eig_; }
    const QPField & stress() const { return sigma_; }
    const QPField & tangent() const { return tangent_; }
    const DamageState & damage_state() const { return state_; }
    const Mandel & applied_strain() const { return applied_strain_; }
    const Mandel & stress_target() const { return stress_target_; }

    const Material & material_at_qp(Index qp) const {
      return materials_[static_cast<std::size_t>(phase_[static_cast<std::size_t>(qp / grid_.nq)])];
    }

    /* -------------------------------------------------------------------- */
    void apply_increment(const LoadIncrement & inc) {
      switch (inc.kind) {
        case LoadKind::MeanStrain: {
          if (this->bc_mode() != ZeroFrequencyMode::StrainControl) {
            throw CellError("mean strain increment on a stress-controlled cell");
          }
          for (Index qp = 0; qp < grid_.quad_points(); ++qp) eps_.at(qp) += inc.value;
          applied_strain_ += inc.value;
          break;
        }
        case LoadKind::MeanStress: {
          if (this->bc_mode() != ZeroFrequencyMode::StressControl) {
            throw CellError("mean stress increment on a strain-controlled cell");
          }
          stress_target_ += inc.value;
          break;
        }
        case LoadKind::Eigenstrain: {
          for (Index pix = 0; pix < grid_.pixels(); ++pix) {
            if (!eigen_mask_[static_cast<std::size_t>(pix)]) continue;
            for (Index q = 0; q < grid_.nq; ++q) eps_eig_.mandel(pix, q) += inc.value;
          }
          break;
        }
      }
    }

    /**
     * Stress (and optionally tangent) at `strain` + eigenstrain against the
     * committed history. The trial history candidate is recorded in the
     * damage state; the committed history is not modified.
     */
    void evaluate(const QPField & strain, QPField & stress, QPField * tangent,
                  TangentKind kind = TangentKind::Consistent) {
      this->evaluate_shifted(strain, nullptr, stress, tangent, kind);
    }

    //! as evaluate, at strain + step without forming the sum as a field
    void evaluate_shifted(const QPField & strain, const QPField * step, QPField & stress,
                          QPField * tangent, TangentKind kind = TangentKind::Consistent) {
      QPField::check_same(strain, eps_);
      if (step != nullptr) QPField::check_same(*step, eps_);
      for (Index qp = 0; qp < grid_.quad_points(); ++qp) {
        Mandel e = strain.at(qp);
        if (step != nullptr) e += step->at(qp);
        e += eps_eig_.at(qp);
        const PointResponse r =
            homog::evaluate(this->material_at_qp(qp), e, state_.committed(qp), kind);
        stress.at(qp) = r.stress;
        if (tangent != nullptr) {
          Eigen::Map<Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>>(tangent->data() + qp * 9) =
              r.tangent;
        }
        state_.record(qp, r.kappa_trial, r.damage);
      }
    }

    //! refreshes the cell's own stress and tangent at its current strain
    void evaluate_current() { this->evaluate(eps_, sigma_, &tangent_); }

    void set_stress(const QPField & s) {
      QPField::check_same(s, sigma_);
      sigma_ = s;
    }

    void commit() { state_.commit(); }
    void discard_trial() { state_.discard_trial(); }

    //! energy gradient: stress minus the imposed mean stress (zero under strain control)
    QPField energy_gradient(const QPField & stress) const {
      QPField g = stress;
      if (this->bc_mode() == ZeroFrequencyMode::StressControl) {
        for (Index qp = 0; qp < grid_.quad_points(); ++qp) g.at(qp) -= stress_target_;
      }
      return g;
    }

    //! in place: stress - target under stress control, unchanged otherwise
    void subtract_stress_target(QPField & stress) const {
      if (this->bc_mode() != ZeroFrequencyMode::StressControl) return;
      for (Index qp = 0; qp < grid_.quad_points(); ++qp) stress.at(qp) -= stress_target_;
    }

    /**
     * b = -G:sigma, plus the zero-frequency term (target - mean stress) under
     * stress control, i.e. b = -G:(sigma - target).
     */
    QPField assemble_rhs() const {
      QPField b = projection_.apply(this->energy_gradient(sigma_));
      b *= -1.;
      return b;
    }

    //! B:x at every quadrature point with the cell's current tangent
    void apply_tangent(const QPField & x, QPField & out) const {
      const Index n = grid_.quad_points();
      if (!(out.shape() == grid_) || out.rank() != 2) out = QPField(grid_, 2);
      for (Index qp = 0; qp < n; ++qp) {
        Eigen::Map<const Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>> b(tangent_.data() + qp * 9);
        out.at(qp) = b * x.at(qp);
      }
    }

    //! G:(B:x)
    void apply_system(const QPField & x, QPField & out) const {
      QPField bx(grid_, 2);
      this->apply_tangent(x, bx);
      projection_.apply(bx, out);
    }

    QPField apply_system(const QPField & x) const {
      QPField out(grid_, 2);
      this->apply_system(x, out);
      return out;
    }

    //! replaces the tangent by the secant (1 - D_committed) C everywhere
    void use_secant_tangent() {
      for (Index qp = 0; qp < grid_.quad_points(); ++qp) {
        const Material & m = this->material_at_qp(qp);
        Mandel4 c = std::visit([](const auto & x) { return x.stiffness(); }, m);
        if (std::holds_alternative<BilinearDamage>(m)) c *= 1. - state_.committed_damage(qp);
        Eigen::Map<Eigen::Matrix<Real, 3, 3, Eigen::RowMajor>>(tangent_.data() + qp * 9) = c;
      }
    }

    Index damaged_qp_count() const {
      Index n{0};
      for (Index qp = 0; qp < grid_.quad_points(); ++qp) {
        if (state_.committed_damage(qp) > 0.) ++n;
      }
      return n;
    }

    Real max_damage() const {
      Real m{0.};
      for (auto d : state_.committed_damage_values()) m = std::max(m, d);
      return m;
    }

   private:
    GridShape grid_{};
    DerivativeScheme scheme_{};
    ProjectionOperator projection_{};
    std::vector<int> phase_{};
    std::vector<Material> materials_{};
    std::vector<std::uint8_t> eigen_mask_{};
    QPField eps_{};
    QPField eps_eig_{};
    QPField sigma_{};
    QPField tangent_{};
    DamageState state_{};
    Mandel applied_strain_{Mandel::Zero()};
    Mandel stress_target_{Mandel::Zero()};
  };

  inline QPField assemble_rhs(const Cell & cell) { return cell.assemble_rhs(); }
  inline QPField apply_system(const Cell & cell, const QPField & x) {
    return cell.apply_system(x);
  }

  /* ---------------------------------------------------------------------- */
  struct EffectiveStiffness {
    Mandel4 stiffness{Mandel4::Zero()};
    Real norm{0.};
    Index cg_iterations{0};
    bool fallback{false};  //!< a probe hit negative curvature
  };

  enum class StiffnessTangent { Secant, Current };

  /**
   * Effective stiffness from three frozen-tangent probe solves
   * G:B:de = -G:B:dE_k under strain control; column k is mean(B:(dE_k + de)).
   * The default tangent is the secant (1 - D) C of the committed history,
   * which is what a damaged cell presents on unloading.
   */
  inline EffectiveStiffness effective_stiffness(Cell & cell, KrylovConfig krylov = {},
                                                StiffnessTangent which = StiffnessTangent::Secant) {
    if (which == StiffnessTangent::Secant) cell.use_secant_tangent();
    const GridShape & g = cell.grid();
    const ProjectionOperator proj =
        cell.projection().with_mode(ZeroFrequencyMode::StrainControl);
    krylov.relative = true;
    krylov.eta_cg = std::min(krylov.eta_cg, 1e-10);

    QPField bx(g, 2);
    QPField out(g, 2);
    QPField x(g, 2);
    auto op = [&](const Vector & in, Vector & result) {
      x.values() = in;
      cell.apply_tangent(x, bx);
      proj.apply(bx, out);
      result = out.values();
    };

    EffectiveStiffness es;
    for (Index k = 0; k < 3; ++k) {
      Mandel unit = Mandel::Zero();
      unit(k) = 1.;
      QPField probe(g, 2);
      probe.set_uniform(unit);
      cell.apply_tangent(probe, bx);
      QPField rhs = proj.apply(bx);
      rhs *= -1.;
      Real radius = std::numeric_limits<Real>::infinity();
      SubproblemResult sol = cg_steihaug(op, rhs.values(), radius, krylov);
      es.cg_iterations += sol.iterations;
      if (sol.termination == Termination::NegativeCurvature) {
        es.fallback = true;
        radius = 10. * euclid_norm(probe.values());
        sol = cg_steihaug(op, rhs.values(), radius, krylov);
        es.cg_iterations += sol.iterations;
      }
      QPField total = probe;
      for (std::size_t i = 0; i < total.values().size(); ++i) total[i] += sol.p[i];
      cell.apply_tangent(total, bx);
      es.stiffness.col(k) = field_mean(bx);
    }
    es.norm = es.stiffness.norm();
    return es;
  }

}  // namespace homog
