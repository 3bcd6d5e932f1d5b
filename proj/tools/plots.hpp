/**
 * @file   plots.hpp
 *
 * @brief  SVG rendering of completed run directories.
 */
#pragma once

#include "experiments.hpp"

#include "homog/svg_plot.hpp"

#include <map>
#include <sstream>

namespace homog::cli {

  class MissingInputs : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string & name) const {
      for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
      throw std::runtime_error("csv: no column '" + name + "'");
    }
    std::vector<double> numbers(const std::string & name) const {
      const std::size_t c = this->column(name);
      std::vector<double> v;
      v.reserve(rows.size());
      for (const auto & r : rows) v.push_back(std::stod(r.at(c)));
      return v;
    }
  };

  inline Table read_csv(const fs::path & p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    auto split = [](const std::string & line) {
      std::vector<std::string> out;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
      return out;
    };
    Table t;
    std::string line;
    if (std::getline(in, line)) t.header = split(line);
    while (std::getline(in, line))
      if (!line.empty()) t.rows.push_back(split(line));
    return t;
  }

  inline void require_files(const fs::path & dir, const std::vector<std::string> & names) {
    std::string missing;
    for (const auto & n : names) {
      if (!fs::exists(dir / n)) missing += (missing.empty() ? "" : ", ") + n;
    }
    if (!missing.empty()) throw MissingInputs("missing in " + dir.string() + ": " + missing);
  }

  inline std::vector<fs::path> plot_spring(const fs::path & dir, const json & summary) {
    std::vector<fs::path> written;
    std::vector<std::string> needed;
    for (const auto & a : summary.at("alphas")) {
      const std::string tag = a.at("tag");
      needed.push_back("landscape_alpha_" + tag + ".csv");
      for (const char * m : {"newton_cg", "standard_tr", "modified_tr"})
        needed.push_back(std::string("trajectory_") + m + "_alpha_" + tag + ".csv");
    }
    require_files(dir, needed);
    for (const auto & a : summary.at("alphas")) {
      const std::string tag = a.at("tag");
      const Table land = read_csv(dir / ("landscape_alpha_" + tag + ".csv"));
      svg::Plot plot;
      plot.title = "spring ring, alpha = " + format_g(a.at("alpha").get<double>());
      plot.xlabel = "x0 (damage spring elongation)";
      plot.ylabel = "energy";
      plot.series.push_back({"W(x0, optimal x1)", land.numbers("x0"), land.numbers("energy"), "#444444"});
      std::size_t colour = 1;
      for (const char * m : {"newton_cg", "standard_tr", "modified_tr"}) {
        const Table tr = read_csv(dir / (std::string("trajectory_") + m + "_alpha_" + tag + ".csv"));
        const auto x0 = tr.numbers("x0"), e = tr.numbers("energy"), acc = tr.numbers("accepted");
        svg::Series s{m, {}, {}, svg::palette()[colour++], true, std::string(m) == "standard_tr"};
        for (std::size_t i = 0; i < x0.size(); ++i) {
          if (acc[i] > 0.5 && std::isfinite(x0[i]) && std::abs(x0[i]) < 1e6) {
            s.x.push_back(x0[i]);
            s.y.push_back(e[i]);
          }
        }
        plot.series.push_back(std::move(s));
      }
      const fs::path out = dir / ("spring_alpha_" + tag + ".svg");
      svg::write(out, plot);
      written.push_back(out);
    }
    return written;
  }

  inline std::vector<fs::path> plot_eshelby(const fs::path & dir) {
    require_files(dir, {"cuts.csv"});
    const Table t = read_csv(dir / "cuts.csv");
    const std::size_t cut = t.column("cut");
    svg::Plot plot;
    plot.title = "inclusion strain e11 along horizontal cuts";
    plot.xlabel = "x";
    plot.ylabel = "e11";
    const std::pair<const char *, const char *> cuts[] = {
        {"center", "#2ca02c"}, {"plus_half_radius", "#9467bd"}, {"minus_half_radius", "#ff7f0e"}};
    for (const auto & [name, colour] : cuts) {
      svg::Series tr{std::string(name) + " (trust region)", {}, {}, colour};
      svg::Series nt{std::string(name) + " (Newton-CG)", {}, {}, colour, false, true};
      const std::size_t cx = t.column("x"), ct = t.column("e11_trust_region"), cn = t.column("e11_newton_cg");
      for (const auto & r : t.rows) {
        if (r.at(cut) != name) continue;
        tr.x.push_back(std::stod(r[cx]));
        tr.y.push_back(std::stod(r[ct]));
        nt.x.push_back(std::stod(r[cx]));
        nt.y.push_back(std::stod(r[cn]));
      }
      plot.series.push_back(std::move(tr));
      plot.series.push_back(std::move(nt));
    }
    const fs::path out = dir / "eshelby_cuts.svg";
    svg::write(out, plot);
    return {out};
  }

  inline std::vector<fs::path> plot_damage(const fs::path & dir, const json & summary) {
    std::vector<std::string> needed;
    for (const auto & m : summary.at("members"))
      needed.push_back(m.at("member").get<std::string>() + "/degradation.csv");
    require_files(dir, needed);

    struct Curve {
      std::string name;
      std::vector<double> x, y;
    };
    std::map<std::pair<Index, double>, std::vector<Curve>> groups;
    svg::Plot all;
    all.title = "stiffness degradation";
    all.xlabel = "gel eigenstrain";
    all.ylabel = "stiffness ratio";
    std::size_t colour = 0;
    for (const auto & m : summary.at("members")) {
      const std::string name = m.at("member");
      const Table t = read_csv(dir / name / "degradation.csv");
      Curve c{name, t.numbers("sum_eigenstrain"), t.numbers("stiffness_ratio")};
      all.series.push_back({name, c.x, c.y, svg::palette()[colour++ % svg::palette().size()], true});
      groups[{m.at("resolution").get<Index>(), m.at("eigenstrain_step").get<double>()}].push_back(std::move(c));
    }
    std::vector<fs::path> written{dir / "degradation.svg"};
    svg::write(written[0], all);

    for (const auto & [key, curves] : groups) {
      if (curves.size() < 2) continue;
      std::size_t len = curves[0].x.size();
      for (const auto & c : curves) len = std::min(len, c.x.size());
      svg::Band band{"min/max over seeds", {}, {}, {}};
      svg::Series mean{"mean", {}, {}, "#08519c"};
      for (std::size_t i = 0; i < len; ++i) {
        double lo = 1e300, hi = -1e300, sum = 0.;
        for (const auto & c : curves) lo = std::min(lo, c.y[i]), hi = std::max(hi, c.y[i]), sum += c.y[i];
        band.x.push_back(curves[0].x[i]);
        band.lo.push_back(lo);
        band.hi.push_back(hi);
        mean.x.push_back(curves[0].x[i]);
        mean.y.push_back(sum / static_cast<double>(curves.size()));
      }
      svg::Plot p;
      p.title = "ensemble, n = " + std::to_string(key.first) + ", step " + format_g(key.second);
      p.xlabel = all.xlabel;
      p.ylabel = all.ylabel;
      p.bands.push_back(std::move(band));
      p.series.push_back(std::move(mean));
      const fs::path out =
          dir / ("ensemble_n" + std::to_string(key.first) + "_step" + format_g(key.second) + ".svg");
      svg::write(out, p);
      written.push_back(out);
    }
    return written;
  }

  /**
   * Renders every plot a run directory supports. Throws MissingInputs
   * naming absent files.
   */
  inline std::vector<fs::path> emit_plots(const fs::path & dir) {
    require_files(dir, {"manifest.json", "summary.json"});
    json summary;
    std::ifstream(dir / "summary.json") >> summary;
    const std::string exp = summary.at("experiment");
    if (exp == "spring1d") return plot_spring(dir, summary);
    if (exp == "eshelby") return plot_eshelby(dir);
    if (exp == "damage_rve") return plot_damage(dir, summary);
    return {};
  }

}  // namespace homog::cli
