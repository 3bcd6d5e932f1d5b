/**
 * @file   vtk.hpp
 *
 * @brief  Legacy ASCII VTK STRUCTURED_POINTS writer for pixel data.
 */
#pragma once

#include "homog/grid_fields.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace homog::vtk {

  struct PixelArray {
    std::string name;
    std::vector<Real> values;  //!< one value per pixel, pixel-major (x fastest)
  };

  //! pixel average over the quadrature points of one component
  inline std::vector<Real> pixel_average(const QPField & f, Index component) {
    const GridShape & g = f.shape();
    if (component < 0 || component >= f.ncomp()) {
      throw GridError("pixel_average: component out of range");
    }
    std::vector<Real> out(static_cast<std::size_t>(g.pixels()), 0.);
    for (Index p = 0; p < g.pixels(); ++p) {
      Real s = 0.;
      for (Index q = 0; q < g.nq; ++q) s += f[f.offset(p, q) + component];
      out[static_cast<std::size_t>(p)] = s / static_cast<Real>(g.nq);
    }
    return out;
  }

  inline void write_structured_points(const std::filesystem::path & path, const GridShape & g,
                                      const std::vector<PixelArray> & arrays,
                                      const std::string & title = "homog") {
    for (const auto & a : arrays) {
      if (static_cast<Index>(a.values.size()) != g.pixels()) {
        throw GridError("vtk: array '" + a.name + "' does not have one value per pixel");
      }
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vtk: cannot open " + path.string());
    out.precision(12);
    out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.nx + 1 << ' ' << g.ny + 1 << " 1\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << g.hx() << ' ' << g.hy() << " 1\n";
    out << "CELL_DATA " << g.pixels() << '\n';
    for (const auto & a : arrays) {
      out << "SCALARS " << a.name << " double 1\nLOOKUP_TABLE default\n";
      for (Real v : a.values) out << v << '\n';
    }
  }

}  // namespace homog::vtk
