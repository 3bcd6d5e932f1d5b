/**
 * @file   microstructure.hpp
 *
 * @brief  Phase maps: seeded aggregate/paste/gel microstructures with
 *         elliptical aggregates graded by a Fuller curve, plus simple
 *         inclusion and laminate maps used by the verification problems.
 *
 * Geometry lives in physical coordinates, so the same seed rasterises to
 * the same microstructure at every resolution. Gel pockets are squares of a
 * fixed coarse cell size and therefore keep their area under refinement.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <random>

namespace homog {

  class MicrostructureError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  enum Phase : int { Paste = 0, Aggregate = 1, Gel = 2 };

  /* ---------------------------------------------------------------------- */
  /**
   * Portable generator: std::mt19937_64 raw output (its sequence is fixed
   * by the standard) and a hand-written uniform double, since the standard
   * distributions are implementation-defined. Streams for distinct entity
   * types are split with splitmix64(seed ^ splitmix64(stream)).
   */
  inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  enum class Stream : std::uint64_t { Aggregates = 1, Gel = 2, Fields = 3 };

  class Rng {
   public:
    Rng(std::uint64_t seed, Stream stream)
        : engine_{splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))} {}
    explicit Rng(std::uint64_t seed) : engine_{seed} {}

    //! uniform in [0, 1) with 53 random bits
    Real uniform() { return static_cast<Real>(engine_() >> 11) * 0x1.0p-53; }
    Real uniform(Real lo, Real hi) { return lo + (hi - lo) * this->uniform(); }
    //! uniform integer in [0, n) by rejection
    std::uint64_t below(std::uint64_t n) {
      const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                  std::numeric_limits<std::uint64_t>::max() % n;
      std::uint64_t x;
      do {
        x = engine_();
      } while (x >= limit);
      return x % n;
    }
    std::uint64_t raw() { return engine_(); }

   private:
    std::mt19937_64 engine_;
  };

  /* ---------------------------------------------------------------------- */
  struct Ellipse {
    Real cx{0.}, cy{0.};
    Real a{1.}, b{1.};  //!< semi-axes, a >= b
    Real angle{0.};

    //! quadratic form value at a displacement from the centre; <= 1 inside
    Real level(Real dx, Real dy) const {
      const Real c = std::cos(angle), s = std::sin(angle);
      const Real u = c * dx + s * dy;
      const Real v = -s * dx + c * dy;
      return (u * u) / (a * a) + (v * v) / (b * b);
    }
    Real area() const { return std::numbers::pi * a * b; }
  };

  //! minimum-image displacement on a periodic interval of length l
  inline Real periodic_delta(Real d, Real l) { return d - l * std::round(d / l); }

  inline bool inside(const Ellipse & e, Real x, Real y, Real lx, Real ly) {
    return e.level(periodic_delta(x - e.cx, lx), periodic_delta(y - e.cy, ly)) <= 1.;
  }

  /**
   * Conservative overlap test with a separation gap: any sampled point of
   * either (gap-inflated) boundary inside the other ellipse counts as
   * overlap, as does a centre inside the other.
   */
  inline bool overlaps(const Ellipse & p, const Ellipse & q, Real gap, Real lx, Real ly) {
    const Real dx = periodic_delta(q.cx - p.cx, lx);
    const Real dy = periodic_delta(q.cy - p.cy, ly);
    if (std::hypot(dx, dy) > p.a + q.a + gap) return false;
    auto probe = [&](const Ellipse & e, const Ellipse & other, Real ox, Real oy) {
      constexpr int n = 96;
      const Real c = std::cos(e.angle), s = std::sin(e.angle);
      for (int i = 0; i < n; ++i) {
        const Real t = 2. * std::numbers::pi * i / n;
        const Real u = (e.a + gap) * std::cos(t);
        const Real v = (e.b + gap) * std::sin(t);
        const Real x = ox + c * u - s * v;
        const Real y = oy + s * u + c * v;
        if (other.level(x, y) <= 1.) return true;
      }
      return other.level(ox, oy) <= 1.;
    };
    // p centred at origin, q at (dx, dy); test both ways in each frame
    Ellipse p0 = p, q0 = q;
    p0.cx = p0.cy = q0.cx = q0.cy = 0.;
    return probe(p0, q0, -dx, -dy) || probe(q0, p0, dx, dy);
  }

  /* ---------------------------------------------------------------------- */
  struct MicrostructureParams {
    Real aggregate_fraction{0.35};
    //! exponent q of the Fuller curve P(d) = (d/d_max)^q
    Real fuller_exponent{0.5};
    Real radius_min{2.5e-3};  //!< [m]
    Real radius_max{8.0e-3};  //!< [m]
    Real aspect_min{1.};
    Real aspect_max{2.};
    Real gap{2.5e-4};  //!< minimum paste layer between aggregates [m]
    Real gel_fraction{0.01};  //!< gel area over cell area
    Index gel_grid{32};  //!< gel pockets are cells of a gel_grid x gel_grid lattice
    Index max_attempts{20000};
    Real fraction_tolerance{0.02};

    void validate() const {
      if (!(aggregate_fraction > 0. && aggregate_fraction < 1.) ||
          !(gel_fraction >= 0. && gel_fraction < 1.)) {
        throw MicrostructureError("fractions must lie in (0, 1)");
      }
      if (!(fuller_exponent > 0.) || !(radius_min > 0.) || radius_max < radius_min) {
        throw MicrostructureError("need q > 0 and 0 < radius_min <= radius_max");
      }
      if (!(aspect_min >= 1.) || aspect_max < aspect_min) {
        throw MicrostructureError("need 1 <= aspect_min <= aspect_max");
      }
      if (gel_grid < 2 || max_attempts < 1 || gap < 0.) {
        throw MicrostructureError("invalid gel grid, gap or attempt budget");
      }
    }
  };

  struct Microstructure {
    GridShape grid{};
    std::vector<int> phase{};
    std::vector<Ellipse> aggregates{};
    std::vector<std::pair<Index, Index>> gel_cells{};  //!< on the gel lattice
    Real aggregate_fraction{0.};  //!< achieved, pixel count (gel counted as aggregate)
    Real gel_fraction{0.};

    std::vector<std::uint8_t> gel_mask() const {
      std::vector<std::uint8_t> m(phase.size(), 0);
      for (std::size_t i = 0; i < phase.size(); ++i) m[i] = phase[i] == Gel;
      return m;
    }
  };

  /**
   * Radius from the Fuller mass distribution restricted to
   * [r_min, r_max]: inverse transform of (r^q - r_min^q)/(r_max^q - r_min^q).
   */
  inline Real fuller_radius(Rng & rng, const MicrostructureParams & p) {
    const Real q = p.fuller_exponent;
    const Real lo = std::pow(p.radius_min, q);
    const Real hi = std::pow(p.radius_max, q);
    return std::pow(lo + rng.uniform() * (hi - lo), 1. / q);
  }

  /**
   * Places aggregates (continuous geometry) until their area reaches the
   * target fraction. The final particle is scaled to land on the target.
   */
  inline std::vector<Ellipse> place_aggregates(Real lx, Real ly, std::uint64_t seed,
                                               const MicrostructureParams & p) {
    p.validate();
    Rng rng(seed, Stream::Aggregates);
    const Real target = p.aggregate_fraction * lx * ly;
    std::vector<Real> radii;
    {
      Real planned{0.};
      while (planned < target) {
        radii.push_back(fuller_radius(rng, p));
        planned += std::numbers::pi * radii.back() * radii.back();
      }
    }
    std::sort(radii.begin(), radii.end(), std::greater<>());

    std::vector<Ellipse> placed;
    Real area{0.};
    Index attempts{0};
    for (Real r : radii) {
      const Real deficit = target - area;
      if (deficit <= 0.) break;
      Real radius = r;
      if (std::numbers::pi * radius * radius > deficit) {
        radius = std::max(p.radius_min, std::sqrt(deficit / std::numbers::pi));
      }
      bool done = false;
      while (!done) {
        if (attempts++ >= p.max_attempts) {
          throw MicrostructureError(
              "aggregate fraction unreachable within the attempt budget; achieved " +
              std::to_string(area / (lx * ly)));
        }
        const Real aspect = rng.uniform(p.aspect_min, p.aspect_max);
        Ellipse e;
        e.a = radius * std::sqrt(aspect);
        e.b = radius / std::sqrt(aspect);
        e.angle = rng.uniform(0., std::numbers::pi);
        e.cx = rng.uniform(0., lx);
        e.cy = rng.uniform(0., ly);
        bool clash = false;
        for (const auto & o : placed) {
          if (overlaps(e, o, p.gap, lx, ly)) {
            clash = true;
            break;
          }
        }
        if (!clash) {
          placed.push_back(e);
          area += e.area();
          done = true;
        }
      }
    }
    return placed;
  }

  /**
   * Gel cells of the gel lattice lying strictly inside one aggregate: the
   * cell grown by one lattice cell on every side must be inside, which
   * keeps a ring of aggregate around each pocket at every resolution.
   */
  inline std::vector<std::pair<Index, Index>>
  eligible_gel_cells(const std::vector<Ellipse> & aggregates, Real lx, Real ly, Index lattice) {
    std::vector<std::pair<Index, Index>> cells;
    const Real cx = lx / static_cast<Real>(lattice);
    const Real cy = ly / static_cast<Real>(lattice);
    for (Index j = 0; j < lattice; ++j) {
      for (Index i = 0; i < lattice; ++i) {
        const Real x0 = (static_cast<Real>(i) - 1.) * cx, x1 = (static_cast<Real>(i) + 2.) * cx;
        const Real y0 = (static_cast<Real>(j) - 1.) * cy, y1 = (static_cast<Real>(j) + 2.) * cy;
        for (const auto & e : aggregates) {
          // the ellipse is convex, so the four corners decide
          if (inside(e, x0, y0, lx, ly) && inside(e, x1, y0, lx, ly) &&
              inside(e, x0, y1, lx, ly) && inside(e, x1, y1, lx, ly)) {
            cells.emplace_back(i, j);
            break;
          }
        }
      }
    }
    return cells;
  }

  inline Microstructure generate_microstructure(GridShape grid, std::uint64_t seed,
                                                const MicrostructureParams & p) {
    grid.validate();
    p.validate();
    if (grid.nx % p.gel_grid != 0 || grid.ny % p.gel_grid != 0) {
      throw MicrostructureError("grid " + std::to_string(grid.nx) + "x" +
                                std::to_string(grid.ny) + " is not a multiple of the gel lattice " +
                                std::to_string(p.gel_grid));
    }
    Microstructure m;
    m.grid = grid;
    m.aggregates = place_aggregates(grid.lx, grid.ly, seed, p);
    m.phase.assign(static_cast<std::size_t>(grid.pixels()), Paste);
    Index agg{0};
    for (Index iy = 0; iy < grid.ny; ++iy) {
      for (Index ix = 0; ix < grid.nx; ++ix) {
        const Real x = (static_cast<Real>(ix) + 0.5) * grid.hx();
        const Real y = (static_cast<Real>(iy) + 0.5) * grid.hy();
        for (const auto & e : m.aggregates) {
          if (inside(e, x, y, grid.lx, grid.ly)) {
            m.phase[static_cast<std::size_t>(grid.pixel(ix, iy))] = Aggregate;
            ++agg;
            break;
          }
        }
      }
    }
    m.aggregate_fraction = static_cast<Real>(agg) / static_cast<Real>(grid.pixels());
    if (std::abs(m.aggregate_fraction - p.aggregate_fraction) > p.fraction_tolerance) {
      throw MicrostructureError("achieved aggregate fraction " +
                                std::to_string(m.aggregate_fraction) + " misses target " +
                                std::to_string(p.aggregate_fraction));
    }

    const Index lattice = p.gel_grid;
    const auto wanted = static_cast<Index>(
        std::llround(p.gel_fraction * static_cast<Real>(lattice * lattice)));
    if (wanted > 0) {
      auto cells = eligible_gel_cells(m.aggregates, grid.lx, grid.ly, lattice);
      if (static_cast<Index>(cells.size()) < wanted) {
        throw MicrostructureError("only " + std::to_string(cells.size()) +
                                  " gel sites inside aggregates, " + std::to_string(wanted) +
                                  " requested");
      }
      Rng rng(seed, Stream::Gel);
      // partial Fisher-Yates with the portable generator
      for (Index i = 0; i < wanted; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(
                               static_cast<Index>(cells.size()) - i)));
        std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
      }
      cells.resize(static_cast<std::size_t>(wanted));
      std::sort(cells.begin(), cells.end());
      m.gel_cells = cells;
      const Index bx = grid.nx / lattice, by = grid.ny / lattice;
      for (const auto & [ci, cj] : cells) {
        for (Index iy = cj * by; iy < (cj + 1) * by; ++iy) {
          for (Index ix = ci * bx; ix < (ci + 1) * bx; ++ix) {
            m.phase[static_cast<std::size_t>(grid.pixel(ix, iy))] = Gel;
          }
        }
      }
    }
    m.gel_fraction = static_cast<Real>(wanted) / static_cast<Real>(lattice * lattice);
    return m;
  }

  /* ---------------------------------------------------------------------- */
  //! circular inclusion (phase 1) centred in the cell, pixel-centre rasterised
  inline std::vector<int> circular_inclusion(const GridShape & g, Real radius) {
    std::vector<int> phase(static_cast<std::size_t>(g.pixels()), 0);
    const Real cx = 0.5 * g.lx, cy = 0.5 * g.ly;
    for (Index iy = 0; iy < g.ny; ++iy) {
      for (Index ix = 0; ix < g.nx; ++ix) {
        const Real x = (static_cast<Real>(ix) + 0.5) * g.hx() - cx;
        const Real y = (static_cast<Real>(iy) + 0.5) * g.hy() - cy;
        if (x * x + y * y <= radius * radius) phase[static_cast<std::size_t>(g.pixel(ix, iy))] = 1;
      }
    }
    return phase;
  }

  //! layers normal to x: phase 1 for columns [0, n1)
  inline std::vector<int> laminate(const GridShape & g, Index n1) {
    std::vector<int> phase(static_cast<std::size_t>(g.pixels()), 0);
    for (Index iy = 0; iy < g.ny; ++iy) {
      for (Index ix = 0; ix < n1; ++ix) phase[static_cast<std::size_t>(g.pixel(ix, iy))] = 1;
    }
    return phase;
  }

}  // namespace homog
