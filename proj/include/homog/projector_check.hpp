/**
 * @file   projector_check.hpp
 *
 * @brief  Randomised self-test of a compatibility projector: idempotency,
 *         self-adjointness, compatible fixed point, zero mean and the
 *         imaginary residue discarded by the inverse transform.
 */
#pragma once

#include "homog/fft_projection.hpp"

#include <json.hpp>

#include <random>

namespace homog {

  struct ProjectorCheck {
    GridShape grid{};
    DerivativeScheme scheme{DerivativeScheme::LinearFE};
    Index samples{0};
    //! max |G(G f) - G f| / |f|
    Real idempotency{0.};
    //! max |<G a, b> - <a, G b>| / (|a| |b|)
    Real self_adjointness{0.};
    //! max |G e - e| / |e| for e = sym grad u
    Real fixed_point{0.};
    //! max |mean(G f)| / |f| (strain control)
    Real zero_mean{0.};
    //! max imaginary residue / |f|
    Real max_imag{0.};

    bool passed(Real tol = 1e-12) const {
      return idempotency <= tol && self_adjointness <= tol && fixed_point <= tol &&
             zero_mean <= 0.1 * tol && max_imag <= tol;
    }
  };

  namespace detail {
    inline void fill_normal(std::span<Real> v, std::mt19937_64 & gen) {
      std::normal_distribution<Real> n;
      for (auto & x : v) x = n(gen);
    }
  }  // namespace detail

  /**
   * Runs the invariants on `samples` random fields of a strain-controlled
   * projector. Norms are the Euclidean norms of the component arrays.
   */
  inline ProjectorCheck check_projector(DerivativeScheme scheme, const GridShape & grid,
                                        Index samples = 4, std::uint64_t seed = 0) {
    const DerivativeOperator d = build_derivative(scheme, grid);
    const ProjectionOperator p = build_projection(d, ZeroFrequencyMode::StrainControl);
    const GridShape & g = d.shape;
    std::mt19937_64 gen(seed);

    ProjectorCheck r;
    r.grid = g;
    r.scheme = scheme;
    r.samples = samples;
    QPField a(g, 2), b(g, 2), ga(g, 2), gb(g, 2), gga(g, 2);
    std::vector<Real> u(static_cast<std::size_t>(2 * g.pixels()));
    for (Index s = 0; s < samples; ++s) {
      detail::fill_normal(a.values(), gen);
      detail::fill_normal(b.values(), gen);
      const Real na = euclid_norm(a), nb = euclid_norm(b);

      ProjectionOperator::Diagnostics diag;
      p.apply(a, ga, &diag);
      r.max_imag = std::max(r.max_imag, diag.max_imag / na);
      p.apply(ga, gga);
      gga -= ga;
      r.idempotency = std::max(r.idempotency, euclid_norm(gga) / na);
      p.apply(b, gb);
      const Real lhs = euclid_dot(ga.values(), b.values());
      const Real rhs = euclid_dot(a.values(), gb.values());
      r.self_adjointness = std::max(r.self_adjointness, std::abs(lhs - rhs) / (na * nb));
      r.zero_mean = std::max(r.zero_mean, field_mean(ga).norm() / na);

      detail::fill_normal(u, gen);
      QPField e = compatible_strain(d, u);
      QPField ge = p.apply(e);
      const Real ne = euclid_norm(e);
      ge -= e;
      r.fixed_point = std::max(r.fixed_point, euclid_norm(ge) / ne);
    }
    return r;
  }

  inline nlohmann::json to_json(const ProjectorCheck & r) {
    return {{"grid", {{"nx", r.grid.nx}, {"ny", r.grid.ny}, {"lx", r.grid.lx},
                      {"ly", r.grid.ly}, {"nq", r.grid.nq}}},
            {"scheme", to_string(r.scheme)},
            {"samples", r.samples},
            {"idempotency", r.idempotency},
            {"self_adjointness", r.self_adjointness},
            {"compatible_fixed_point", r.fixed_point},
            {"zero_mean", r.zero_mean},
            {"max_imag", r.max_imag},
            {"passed", r.passed()}};
  }

}  // namespace homog
