/**
 * @file   svg_plot.hpp
 *
 * @brief  Minimal deterministic SVG line plots: polylines, optional markers,
 *         min/max bands, linear axes with rounded ticks and a legend.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace homog::svg {

  struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color{"#1f77b4"};
    bool markers{false};
    bool dashed{false};
  };

  struct Band {
    std::string label;
    std::vector<double> x;
    std::vector<double> lo;
    std::vector<double> hi;
    std::string color{"#9ecae1"};
  };

  struct Plot {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<Band> bands{};
    std::vector<Series> series{};
    double width{640.};
    double height{420.};
  };

  inline const std::vector<std::string> & palette() {
    static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return p;
  }

  namespace detail {
    inline std::string num(double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", v);
      return buf;
    }

    inline std::string tick_label(double v) {
      if (std::abs(v) < 1e-300) return "0";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4g", v);
      return buf;
    }

    inline std::string escape(const std::string & s) {
      std::string out;
      for (char c : s) {
        switch (c) {
          case '&': out += "&amp;"; break;
          case '<': out += "&lt;"; break;
          case '>': out += "&gt;"; break;
          case '"': out += "&quot;"; break;
          default: out += c;
        }
      }
      return out;
    }

    struct Range {
      double lo{std::numeric_limits<double>::infinity()};
      double hi{-std::numeric_limits<double>::infinity()};
      void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      void finish() {
        if (!(lo <= hi)) lo = 0., hi = 1.;
        if (hi - lo <= 1e-300 * std::max(1., std::abs(hi))) {
          const double pad = std::abs(hi) > 0. ? 0.05 * std::abs(hi) : 1.;
          lo -= pad;
          hi += pad;
        }
      }
    };

    //! ticks at 1, 2 or 5 times a power of ten, about n of them
    inline std::vector<double> ticks(Range & r, int n = 5) {
      const double raw = (r.hi - r.lo) / n;
      const double mag = std::pow(10., std::floor(std::log10(raw)));
      double step = mag;
      for (double m : {1., 2., 5., 10.}) {
        step = m * mag;
        if (step >= raw) break;
      }
      r.lo = std::floor(r.lo / step) * step;
      r.hi = std::ceil(r.hi / step) * step;
      std::vector<double> t;
      const auto count = static_cast<long>(std::llround((r.hi - r.lo) / step));
      for (long i = 0; i <= count; ++i) t.push_back(r.lo + static_cast<double>(i) * step);
      return t;
    }
  }  // namespace detail

  inline std::string render(const Plot & plot) {
    for (const auto & s : plot.series) {
      if (s.x.size() != s.y.size()) throw std::invalid_argument("svg: series '" + s.label + "' x/y size mismatch");
    }
    for (const auto & b : plot.bands) {
      if (b.x.size() != b.lo.size() || b.x.size() != b.hi.size()) {
        throw std::invalid_argument("svg: band '" + b.label + "' size mismatch");
      }
    }
    detail::Range xr, yr;
    for (const auto & s : plot.series) {
      for (double v : s.x) xr.add(v);
      for (double v : s.y) yr.add(v);
    }
    for (const auto & b : plot.bands) {
      for (double v : b.x) xr.add(v);
      for (double v : b.lo) yr.add(v);
      for (double v : b.hi) yr.add(v);
    }
    xr.finish();
    yr.finish();
    const auto xt = detail::ticks(xr);
    const auto yt = detail::ticks(yr);

    const double left = 80., right = 20., top = 40., bottom = 60.;
    const double pw = plot.width - left - right, ph = plot.height - top - bottom;
    auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double v) { return top + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };
    using detail::num;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(plot.width)
      << "\" height=\"" << num(plot.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(plot.title) << "</text>\n";
    for (double t : xt) {
      o << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(px(t))
        << "\" y2=\"" << num(top + ph) << "\" stroke=\"#e0e0e0\"/>\n";
      o << "<text x=\"" << num(px(t)) << "\" y=\"" << num(top + ph + 16)
        << "\" text-anchor=\"middle\">" << detail::tick_label(t) << "</text>\n";
    }
    for (double t : yt) {
      o << "<line x1=\"" << num(left) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left + pw)
        << "\" y2=\"" << num(py(t)) << "\" stroke=\"#e0e0e0\"/>\n";
      o << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(t) + 4)
        << "\" text-anchor=\"end\">" << detail::tick_label(t) << "</text>\n";
    }
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
      << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(plot.height - 16)
      << "\" text-anchor=\"middle\">" << detail::escape(plot.xlabel) << "</text>\n";
    o << "<text transform=\"translate(18," << num(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(plot.ylabel) << "</text>\n";

    for (const auto & b : plot.bands) {
      if (b.x.empty()) continue;
      o << "<polygon fill=\"" << b.color << "\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < b.x.size(); ++i) o << num(px(b.x[i])) << ',' << num(py(b.hi[i])) << ' ';
      for (std::size_t i = b.x.size(); i-- > 0;) o << num(px(b.x[i])) << ',' << num(py(b.lo[i])) << ' ';
      o << "\"/>\n";
    }
    for (const auto & s : plot.series) {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
      if (s.dashed) o << " stroke-dasharray=\"6,4\"";
      o << " points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
      }
      o << "\"/>\n";
      if (s.markers) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
          o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
            << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        }
      }
    }

    double ly = top + 14.;
    auto legend = [&](const std::string & label, const std::string & color, bool fill) {
      if (label.empty()) return;
      const double lx = left + pw - 170.;
      if (fill) {
        o << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 8) << "\" width=\"18\" height=\"10\" fill=\""
          << color << "\" fill-opacity=\"0.5\"/>\n";
      } else {
        o << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly - 3) << "\" x2=\"" << num(lx + 18)
          << "\" y2=\"" << num(ly - 3) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      }
      o << "<text x=\"" << num(lx + 24) << "\" y=\"" << num(ly) << "\">" << detail::escape(label)
        << "</text>\n";
      ly += 16.;
    };
    for (const auto & b : plot.bands) legend(b.label, b.color, true);
    for (const auto & s : plot.series) legend(s.label, s.color, false);
    o << "</svg>\n";
    return o.str();
  }

  inline void write(const std::filesystem::path & path, const Plot & plot) {
    const std::string text = render(plot);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("svg: cannot open " + path.string());
    out << text;
  }

}  // namespace homog::svg
