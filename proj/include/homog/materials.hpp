/**
 * @file   materials.hpp
 *
 * @brief  Plane-strain constitutive laws at a quadrature point: linear
 *         elasticity and the bilinear, tension-only scalar damage law with a
 *         masking-matrix tangent and crack-band regularisation.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <algorithm>
#include <variant>

namespace homog {

  class MaterialError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
  };

  struct LinearElastic {
    Real young{1.};
    Real poisson{0.3};

    void validate() const {
      if (!(young > 0.) || !(poisson > -1. && poisson < 0.5)) {
        throw MaterialError("linear elastic: need E > 0 and -1 < nu < 0.5");
      }
    }
    Mandel4 stiffness() const { return isotropic_stiffness(young, poisson); }
  };

  /**
   * Bilinear scalar damage driven by the norm of the tensile part of strain.
   * D(kappa) = (kappa - kappa0)(1 + alpha)/kappa above the threshold, so the
   * post-peak slope of (1 - D) E0 kappa is -alpha E0; alpha > 0 softens.
   */
  struct BilinearDamage {
    Real young{1.};
    Real poisson{0.3};
    Real kappa0{1e-4};
    Real alpha{0.1};
    Real fracture_energy{0.};  //!< Gc [J/m^2], informational once alpha is set
    Real tensile_strength{0.};  //!< ft0 [Pa]

    //! residual stiffness floor, D never exceeds this
    static constexpr Real max_damage = 1. - 1e-9;

    void validate() const {
      if (!(young > 0.) || !(poisson > -1. && poisson < 0.5)) {
        throw MaterialError("damage: need E0 > 0 and -1 < nu < 0.5");
      }
      if (!(kappa0 > 0.) || !std::isfinite(alpha)) {
        throw MaterialError("damage: need kappa0 > 0 and finite alpha");
      }
    }
    Mandel4 stiffness() const { return isotropic_stiffness(young, poisson); }

    Real damage(Real kappa) const {
      if (kappa <= kappa0) return 0.;
      return std::clamp((kappa - kappa0) * (1. + alpha) / kappa, 0., max_damage);
    }

    //! dD/dkappa, zero wherever D is clamped
    Real damage_slope(Real kappa) const {
      if (kappa <= kappa0) return 0.;
      const Real d = (kappa - kappa0) * (1. + alpha) / kappa;
      if (d <= 0. || d >= max_damage) return 0.;
      return (1. + alpha) * kappa0 / (kappa * kappa);
    }

    //! measure at which the uniaxial stress (1-D) E0 kappa reaches zero
    Real ultimate_measure() const { return kappa0 * (1. + alpha) / alpha; }
  };

  using Material = std::variant<LinearElastic, BilinearDamage>;

  /* ---------------------------------------------------------------------- */
  struct TensileMeasure {
    Real kappa{0.};
    Mandel tensile_part{Mandel::Zero()};  //!< M eps M
  };

  /**
   * kappa = |M eps M| with M the projector onto eigenvectors of positive
   * eigenvalues. For a 2x2 tensor the single-positive-eigenvalue case uses
   * q q^T = (eps - l2 I)/(l1 - l2), where l1 - l2 >= l1 > 0, so no
   * eigenvector derivative or division by a vanishing gap occurs.
   */
  inline TensileMeasure damage_measure(const Mandel & eps) {
    const Real a = eps(0);
    const Real b = eps(1);
    const Real c = eps(2) / sqrt2;
    const Real mean = 0.5 * (a + b);
    const Real rad = std::hypot(0.5 * (a - b), c);
    const Real l1 = mean + rad;
    const Real l2 = mean - rad;
    TensileMeasure m;
    if (l2 > 0.) {
      m.tensile_part = eps;
      m.kappa = std::hypot(l1, l2);
    } else if (l1 > 0.) {
      const Real inv = 1. / (l1 - l2);
      // l1 * (eps - l2 I) / (l1 - l2)
      m.tensile_part = Mandel{l1 * (a - l2) * inv, l1 * (b - l2) * inv, l1 * eps(2) * inv};
      m.kappa = l1;
    }
    return m;
  }

  enum class TangentKind { Consistent, Secant };

  struct PointResponse {
    Mandel stress{Mandel::Zero()};
    Mandel4 tangent{Mandel4::Zero()};
    Real kappa_trial{0.};
    Real damage{0.};
    bool softening{false};  //!< on the active (loading) damage branch
  };

  inline PointResponse evaluate(const LinearElastic & mat, const Mandel & eps) {
    if (!eps.allFinite()) throw MaterialError("evaluate: non-finite strain");
    PointResponse r;
    r.tangent = mat.stiffness();
    r.stress = r.tangent * eps;
    return r;
  }

  /**
   * Damage update against the committed history. kappa_trial is the new
   * history candidate; the committed value is never touched here. The
   * consistent tangent on the loading branch is
   *   (1-D) C - (C eps) (x) D'(kappa) M eps M / kappa.
   */
  inline PointResponse evaluate(const BilinearDamage & mat, const Mandel & eps,
                                Real kappa_committed,
                                TangentKind kind = TangentKind::Consistent) {
    if (!eps.allFinite()) throw MaterialError("evaluate: non-finite strain");
    const TensileMeasure m = damage_measure(eps);
    const Mandel4 c = mat.stiffness();
    PointResponse r;
    r.kappa_trial = std::max(kappa_committed, m.kappa);
    r.damage = mat.damage(r.kappa_trial);
    const Mandel c_eps = c * eps;
    r.stress = (1. - r.damage) * c_eps;
    r.tangent = (1. - r.damage) * c;
    r.softening = m.kappa >= kappa_committed && m.kappa > mat.kappa0;
    if (kind == TangentKind::Consistent && r.softening) {
      const Real slope = mat.damage_slope(m.kappa);
      if (slope != 0.) {
        r.tangent -= c_eps * (slope / m.kappa) * m.tensile_part.transpose();
      }
    }
    return r;
  }

  inline PointResponse evaluate(const Material & mat, const Mandel & eps,
                                Real kappa_committed,
                                TangentKind kind = TangentKind::Consistent) {
    return std::visit(
        [&](const auto & m) -> PointResponse {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, LinearElastic>) {
            PointResponse r = evaluate(m, eps);
            r.kappa_trial = kappa_committed;
            return r;
          } else {
            return evaluate(m, eps, kappa_committed, kind);
          }
        },
        mat);
  }

  /**
   * Crack-band regularisation: the softening branch from kappa0 = ft0/E0 to
   * the zero-stress measure ku encloses Gc/h, i.e. ku = kappa0 + 2 Gc/(ft0 h).
   * Returns the alpha of BilinearDamage realising that ku.
   */
  inline Real regularize_softening(Real fracture_energy, Real tensile_strength,
                                   Real young, Real element_size) {
    if (!(fracture_energy > 0.) || !(tensile_strength > 0.) || !(young > 0.) ||
        !(element_size > 0.)) {
      throw MaterialError("regularize_softening: all inputs must be positive");
    }
    const Real max_size =
        2. * fracture_energy * young / (tensile_strength * tensile_strength);
    if (element_size > max_size) {
      throw MaterialError("regularize_softening: element size " +
                          std::to_string(element_size) + " exceeds " +
                          std::to_string(max_size) + " (snap-back); refine the grid");
    }
    const Real kappa0 = tensile_strength / young;
    const Real kappa_u =
        kappa0 + 2. * fracture_energy / (tensile_strength * element_size);
    return kappa0 / (kappa_u - kappa0);
  }

  inline BilinearDamage make_regularized_damage(Real young, Real poisson,
                                                Real fracture_energy,
                                                Real tensile_strength,
                                                Real element_size) {
    BilinearDamage d;
    d.young = young;
    d.poisson = poisson;
    d.kappa0 = tensile_strength / young;
    d.alpha = regularize_softening(fracture_energy, tensile_strength, young, element_size);
    d.fracture_energy = fracture_energy;
    d.tensile_strength = tensile_strength;
    d.validate();
    return d;
  }

  /* ---------------------------------------------------------------------- */
  /**
   * Per-quadrature-point damage history with committed and trial values.
   */
  class DamageState {
   public:
    DamageState() = default;
    explicit DamageState(Index n)
        : committed_(static_cast<std::size_t>(n), 0.),
          trial_(static_cast<std::size_t>(n), 0.),
          damage_(static_cast<std::size_t>(n), 0.),
          committed_damage_(static_cast<std::size_t>(n), 0.) {}

    Index size() const { return static_cast<Index>(committed_.size()); }
    Real committed(Index i) const { return committed_[static_cast<std::size_t>(i)]; }
    Real trial(Index i) const { return trial_[static_cast<std::size_t>(i)]; }
    //! damage of the latest evaluation
    Real damage(Index i) const { return damage_[static_cast<std::size_t>(i)]; }
    //! damage belonging to the committed history
    Real committed_damage(Index i) const {
      return committed_damage_[static_cast<std::size_t>(i)];
    }
    const std::vector<Real> & committed_values() const { return committed_; }
    const std::vector<Real> & committed_damage_values() const { return committed_damage_; }
    bool has_trial() const { return has_trial_; }

    void record(Index i, Real kappa_trial, Real damage) {
      trial_[static_cast<std::size_t>(i)] = kappa_trial;
      damage_[static_cast<std::size_t>(i)] = damage;
      has_trial_ = true;
    }

    //! kappa_committed <- max(kappa_committed, kappa_trial); trial cleared
    void commit() {
      if (!has_trial_) return;
      for (std::size_t i = 0; i < committed_.size(); ++i) {
        if (trial_[i] > committed_[i]) {
          committed_[i] = trial_[i];
          committed_damage_[i] = damage_[i];
        }
        trial_[i] = committed_[i];
      }
      has_trial_ = false;
    }

    //! drop a trial evaluation without touching the committed history
    void discard_trial() {
      trial_ = committed_;
      damage_ = committed_damage_;
      has_trial_ = false;
    }

   private:
    std::vector<Real> committed_{};
    std::vector<Real> trial_{};
    std::vector<Real> damage_{};
    std::vector<Real> committed_damage_{};
    bool has_trial_{false};
  };

}  // namespace homog
