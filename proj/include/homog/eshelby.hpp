/**
 * @file   eshelby.hpp
 *
 * @brief  Circular inhomogeneity in an infinite plane-strain matrix under a
 *         remote equibiaxial strain, and interior statistics of a computed
 *         strain field for comparison.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <vector>

namespace homog {

  //! plane-strain bulk modulus lambda + mu
  inline Real plane_strain_bulk(Real young, Real poisson) {
    const Real lambda = young * poisson / ((1. + poisson) * (1. - 2. * poisson));
    const Real mu = young / (2. * (1. + poisson));
    return lambda + mu;
  }

  /**
   * Uniform interior normal strain of a circular inclusion under the remote
   * strain diag(e, e): e (K_m + mu_m) / (K_i + mu_m).
   */
  inline Real circular_inclusion_strain(Real remote, Real young_m, Real poisson_m, Real young_i,
                                        Real poisson_i) {
    const Real mu_m = young_m / (2. * (1. + poisson_m));
    return remote * (plane_strain_bulk(young_m, poisson_m) + mu_m) /
           (plane_strain_bulk(young_i, poisson_i) + mu_m);
  }

  struct InteriorStats {
    Real mean{0.};
    Real rsd{0.};  //!< standard deviation over |mean|
    Index count{0};
  };

  /**
   * Statistics of one Mandel component over the quadrature points of pixels
   * whose centres lie more than `margin` pixels inside a centred circle.
   */
  inline InteriorStats interior_stats(const QPField & strain, Real radius, Real margin = 2.,
                                      Index component = 0) {
    const GridShape & g = strain.shape();
    const Real h = std::max(g.hx(), g.hy());
    const Real limit = radius - margin * h;
    std::vector<Real> v;
    for (Index iy = 0; iy < g.ny; ++iy) {
      for (Index ix = 0; ix < g.nx; ++ix) {
        const Real x = (static_cast<Real>(ix) + 0.5) * g.hx() - 0.5 * g.lx;
        const Real y = (static_cast<Real>(iy) + 0.5) * g.hy() - 0.5 * g.ly;
        if (std::hypot(x, y) >= limit) continue;
        for (Index q = 0; q < g.nq; ++q) v.push_back(strain[strain.offset(g.pixel(ix, iy), q) + component]);
      }
    }
    InteriorStats s;
    s.count = static_cast<Index>(v.size());
    if (v.empty()) return s;
    Real sum = 0.;
    for (Real x : v) sum += x;
    s.mean = sum / static_cast<Real>(v.size());
    Real var = 0.;
    for (Real x : v) var += (x - s.mean) * (x - s.mean);
    s.rsd = std::sqrt(var / static_cast<Real>(v.size())) / std::abs(s.mean);
    return s;
  }

}  // namespace homog
