/**
 * @file   experiments.hpp
 *
 * @brief  Drivers for the four experiments; each writes its data files into
 *         an output directory and returns a summary document.
 */
#pragma once

#include "config.hpp"

#include "homog/eshelby.hpp"
#include "homog/npy.hpp"
#include "homog/projector_check.hpp"
#include "homog/vtk.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace homog::cli {

  namespace fs = std::filesystem;

  struct RunOptions {
    fs::path out;
    bool trace{false};
    bool check_projector{false};
  };

  struct Outcome {
    int exit_code{0};
    json summary{};
    std::string failure{};  //!< set when a solve diverged
  };

  inline std::string format_g(Real v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  inline std::ofstream open_out(const fs::path & p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
    return out;
  }

  inline void write_json(const fs::path & p, const json & j) { open_out(p) << j.dump(2) << '\n'; }

  //! non-finite values become null
  inline json finite_or_null(Real v) { return std::isfinite(v) ? json(v) : json(nullptr); }

  inline json report_json(const ConvergenceReport & r) {
    json steps = json::array();
    for (const auto & s : r.steps) {
      json radii = json::array();
      for (Real v : s.radius_history) radii.push_back(finite_or_null(v));
      steps.push_back({{"step", s.step},
                       {"newton_iters", s.newton_iters},
                       {"cg_iters_total", s.cg_iters_total},
                       {"rejections", s.rejections},
                       {"final_residual", finite_or_null(s.final_residual)},
                       {"radius_history", radii},
                       {"converged", s.converged},
                       {"status", s.status}});
    }
    return {{"method", r.method},
            {"converged", r.converged},
            {"status", r.status},
            {"persistent_fields", r.persistent_fields},
            {"total_newton_iters", r.total_newton()},
            {"total_cg_iters", r.total_cg()},
            {"steps", steps}};
  }

  inline unsigned worker_count(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char * env = std::getenv("HOMOG_THREADS")) {
      try {
        const long cap = std::stol(env);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
      } catch (const std::exception &) {
        throw ConfigError(std::string("HOMOG_THREADS: not an integer '") + env + "'");
      }
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
  }

  //! runs job(i) for i < n on a capped worker pool; the first exception is rethrown
  template <class Job>
  void parallel_for(std::size_t n, Job job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex m;
    auto worker = [&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!error) error = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const unsigned workers = worker_count(n);
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto & t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  inline json projector_report(const GridShape & g, DerivativeScheme scheme, Index samples,
                               std::uint64_t seed) {
    return to_json(check_projector(scheme, g, samples, seed));
  }

  /* ---------------------------------------------------------------------- */
  inline std::string alpha_tag(Real a) {
    std::string s = format_g(a);
    if (!s.empty() && s[0] == '-') s[0] = 'm';
    return s;
  }

  inline Outcome run_spring(const SpringRun & r, const RunOptions & opt) {
    Outcome o;
    json per_alpha = json::array();
    for (Real a : r.alphas) {
      spring::SpringSystem s = r.system;
      s.alpha = a;
      const std::string tag = alpha_tag(a);
      {
        auto out = open_out(opt.out / ("landscape_alpha_" + tag + ".csv"));
        spring::write_landscape_csv(out, s, r.x0_min, r.x0_max, r.points);
      }
      const Eigen::Vector3d ev =
          Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(spring::post_peak_stiffness(s)).eigenvalues();
      json methods = json::object();
      for (auto m : {spring::Method::NewtonCG, spring::Method::StandardTR, spring::Method::ModifiedTR}) {
        const spring::SolveResult res = spring::spring_solve(s, r.start, m, r.solver);
        auto out = open_out(opt.out / (std::string("trajectory_") + to_string(m) + "_alpha_" + tag + ".csv"));
        spring::write_trajectory_csv(out, res);
        methods[to_string(m)] = {{"converged", res.converged},
                                 {"status", res.status},
                                 {"x", {res.x(0), res.x(1)}},
                                 {"newton_iters", res.newton_iters},
                                 {"trials", res.trajectory.size() - 1},
                                 {"min_hessian_eigenvalue", finite_or_null(res.min_hessian_eigenvalue)}};
        if (m != spring::Method::NewtonCG && !res.converged && o.failure.empty()) {
          o.failure = std::string(to_string(m)) + " did not converge for alpha = " + format_g(a) +
                      " (" + res.status + ")";
        }
      }
      per_alpha.push_back({{"alpha", a},
                           {"tag", tag},
                           {"post_peak_eigenvalues", {ev(0), ev(1), ev(2)}},
                           {"methods", methods}});
    }
    o.summary = {{"experiment", "spring1d"},
                 {"k", r.system.k},
                 {"gamma0", r.system.gamma0},
                 {"xbar", r.system.xbar},
                 {"x_start", {r.start(0), r.start(1)}},
                 {"alphas", per_alpha}};
    write_json(opt.out / "convergence.json", per_alpha);
    if (!o.failure.empty()) o.exit_code = 2;
    return o;
  }

  /* ---------------------------------------------------------------------- */
  inline Outcome run_eshelby(const EshelbyRun & r, const RunOptions & opt) {
    Outcome o;
    const GridShape & g = r.grid;
    const std::vector<int> phase = circular_inclusion(g, r.radius);
    const std::vector<Material> mats{r.matrix, r.inclusion};
    const LoadProgram program = LoadProgram::constant(
        LoadKind::MeanStrain, r.mean_strain / static_cast<Real>(r.steps), r.steps);

    struct Solved {
      Cell cell;
      ConvergenceReport report;
    };
    auto solve = [&](SolverMethod m) {
      Cell cell(g, r.scheme, phase, mats, ZeroFrequencyMode::StrainControl);
      CellSolver solver(cell, m, r.solver);
      std::ofstream trace;
      if (opt.trace) {
        trace = open_out(opt.out / (std::string("trace_") + to_string(m) + ".csv"));
        trace.precision(17);
        write_trace_header(trace);
        solver.set_trace([&trace](const NewtonTraceRow & row) { write_trace_row(trace, row); });
      }
      ConvergenceReport rep = solver.solve(program);
      return Solved{std::move(cell), std::move(rep)};
    };
    Solved newton = solve(SolverMethod::NewtonCG);
    Solved tr = solve(SolverMethod::TrustRegion);

    QPField diff = tr.cell.strain();
    diff -= newton.cell.strain();
    const Real rel_diff = euclid_norm(diff) / euclid_norm(newton.cell.strain());

    npy::dump_field(opt.out / "strain_newton_cg", newton.cell.strain(), "1");
    npy::dump_field(opt.out / "strain_trust_region", tr.cell.strain(), "1");
    npy::dump_field(opt.out / "strain_difference", diff, "1");
    npy::dump_field(opt.out / "stress_trust_region", tr.cell.stress(), "Pa");
    {
      std::vector<std::int32_t> ph(phase.begin(), phase.end());
      npy::write_i4(opt.out / "phase.npy", {std::size_t(g.ny), std::size_t(g.nx)}, ph);
    }
    {
      std::vector<vtk::PixelArray> arrays;
      arrays.push_back({"phase", std::vector<Real>(phase.begin(), phase.end())});
      const char * names[] = {"e11", "e22", "e12_mandel"};
      for (Index c = 0; c < 3; ++c) {
        arrays.push_back({std::string(names[c]) + "_trust_region", vtk::pixel_average(tr.cell.strain(), c)});
        arrays.push_back({std::string(names[c]) + "_difference", vtk::pixel_average(diff, c)});
      }
      vtk::write_structured_points(opt.out / "fields.vtk", g, arrays, "eshelby inclusion");
    }
    {
      // horizontal cuts through the centre and at +-r/2
      auto out = open_out(opt.out / "cuts.csv");
      out.precision(17);
      out << "cut,y,x,e11_newton_cg,e22_newton_cg,e11_trust_region,e22_trust_region\n";
      const std::vector<Real> e11n = vtk::pixel_average(newton.cell.strain(), 0),
                              e22n = vtk::pixel_average(newton.cell.strain(), 1),
                              e11t = vtk::pixel_average(tr.cell.strain(), 0),
                              e22t = vtk::pixel_average(tr.cell.strain(), 1);
      const std::pair<const char *, Real> cuts[] = {
          {"center", 0.}, {"plus_half_radius", 0.5 * r.radius}, {"minus_half_radius", -0.5 * r.radius}};
      for (const auto & [name, offset] : cuts) {
        const auto iy = std::clamp<Index>(
            static_cast<Index>(std::floor((0.5 * g.ly + offset) / g.hy())), 0, g.ny - 1);
        const Real y = (static_cast<Real>(iy) + 0.5) * g.hy();
        for (Index ix = 0; ix < g.nx; ++ix) {
          const auto p = static_cast<std::size_t>(g.pixel(ix, iy));
          out << name << ',' << y << ',' << (static_cast<Real>(ix) + 0.5) * g.hx() << ',' << e11n[p]
              << ',' << e22n[p] << ',' << e11t[p] << ',' << e22t[p] << '\n';
        }
      }
    }

    write_json(opt.out / "convergence.json",
               {{"newton_cg", report_json(newton.report)}, {"trust_region", report_json(tr.report)}});
    for (const auto * rep : {&newton.report, &tr.report}) {
      if (!rep->converged && o.failure.empty()) o.failure = rep->method + ": " + rep->status;
    }

    const InteriorStats in = interior_stats(tr.cell.strain(), r.radius);
    json analytic = nullptr;
    if (std::abs(r.mean_strain(0) - r.mean_strain(1)) <= 1e-15 * std::abs(r.mean_strain(0)) &&
        r.mean_strain(2) == 0.) {
      analytic = circular_inclusion_strain(r.mean_strain(0), r.matrix.young, r.matrix.poisson,
                                           r.inclusion.young, r.inclusion.poisson);
    }
    o.summary = {{"experiment", "eshelby"},
                 {"grid", npy::grid_json(g)},
                 {"scheme", scheme_key(r.scheme)},
                 {"radius", r.radius},
                 {"relative_difference", rel_diff},
                 {"newton_cg_iters", newton.report.total_newton()},
                 {"trust_region_iters", tr.report.total_newton()},
                 {"interior_e11_mean", in.mean},
                 {"interior_e11_rsd", in.rsd},
                 {"interior_qp_count", in.count},
                 {"analytic_interior_strain", analytic}};
    if (opt.check_projector) {
      write_json(opt.out / "projector_check.json", projector_report(g, r.scheme, 4, 0));
    }
    if (!o.failure.empty()) o.exit_code = 2;
    return o;
  }

  /* ---------------------------------------------------------------------- */
  struct DamageMember {
    Index resolution{0};
    Real step{0.};
    std::uint64_t seed{0};
    std::string name() const {
      return "n" + std::to_string(resolution) + "_step" + format_g(step) + "_seed" + std::to_string(seed);
    }
  };

  struct MemberResult {
    DegradationCurve curve{};
    json summary{};
  };

  inline MemberResult run_damage_member(const DamageRun & r, const DamageMember & mem,
                                        const RunOptions & opt) {
    const fs::path dir = opt.out / mem.name();
    fs::create_directories(dir);
    const GridShape g{mem.resolution, mem.resolution, r.lx, r.ly, scheme_quad_points(r.scheme)};
    const Microstructure ms = generate_microstructure(g, mem.seed, r.microstructure);
    {
      std::vector<std::int32_t> ph(ms.phase.begin(), ms.phase.end());
      npy::write_i4(dir / "phase.npy", {std::size_t(g.ny), std::size_t(g.nx)}, ph);
      json aggs = json::array();
      for (const auto & e : ms.aggregates) aggs.push_back({e.cx, e.cy, e.a, e.b, e.angle});
      write_json(dir / "phase.json", {{"grid", npy::grid_json(g)},
                                      {"phases", {"paste", "aggregate", "gel"}},
                                      {"aggregate_fraction", ms.aggregate_fraction},
                                      {"gel_fraction", ms.gel_fraction},
                                      {"aggregates_cx_cy_a_b_angle", aggs},
                                      {"units", "m"}});
    }
    Cell cell = make_damage_cell(ms, r.materials, r.scheme);
    const auto steps = static_cast<Index>(std::llround(r.final_eigenstrain / mem.step));

    std::ofstream trace;
    CellSolver::TraceSink sink;
    if (opt.trace) {
      trace = open_out(dir / "trace.csv");
      trace.precision(17);
      write_trace_header(trace);
      sink = [&trace](const NewtonTraceRow & row) { write_trace_row(trace, row); };
    }
    MemberResult res;
    res.curve = run_damage_study(cell, mem.step, steps, r.solver, SolverMethod::TrustRegion,
                                 nullptr, std::move(sink));
    {
      auto out = open_out(dir / "degradation.csv");
      write_degradation_csv(out, res.curve);
    }
    write_json(dir / "convergence.json", report_json(res.curve.report));

    const DamageState & st = cell.damage_state();
    Real dmin = 1., dmax = 0.;
    for (Real d : st.committed_damage_values()) dmin = std::min(dmin, d), dmax = std::max(dmax, d);
    if (r.dump_fields) {
      const std::vector<std::size_t> shape{std::size_t(g.ny), std::size_t(g.nx), std::size_t(g.nq)};
      npy::write_f8(dir / "damage.npy", shape, st.committed_damage_values());
      npy::write_f8(dir / "kappa.npy", shape, st.committed_values());
      npy::dump_field(dir / "strain", cell.strain(), "1");
      QPField dmg(g, 0);
      for (Index i = 0; i < g.quad_points(); ++i) dmg[i] = st.committed_damage(i);
      std::vector<vtk::PixelArray> arrays;
      arrays.push_back({"phase", std::vector<Real>(ms.phase.begin(), ms.phase.end())});
      arrays.push_back({"damage", vtk::pixel_average(dmg, 0)});
      arrays.push_back({"e11", vtk::pixel_average(cell.strain(), 0)});
      arrays.push_back({"e22", vtk::pixel_average(cell.strain(), 1)});
      vtk::write_structured_points(dir / "fields.vtk", g, arrays, "damage " + mem.name());
    }
    res.summary = {{"member", mem.name()},
                   {"resolution", mem.resolution},
                   {"eigenstrain_step", mem.step},
                   {"seed", mem.seed},
                   {"complete", res.curve.complete},
                   {"status", res.curve.status},
                   {"steps_done", res.curve.rows.size() - 1},
                   {"final_stiffness_ratio", res.curve.rows.back().stiffness_ratio},
                   {"min_damage", dmin},
                   {"max_damage", dmax},
                   {"aggregate_fraction", ms.aggregate_fraction},
                   {"gel_fraction", ms.gel_fraction},
                   {"total_newton_iters", res.curve.report.total_newton()},
                   {"total_cg_iters", res.curve.report.total_cg()}};
    return res;
  }

  inline Outcome run_damage(const DamageRun & r, const RunOptions & opt) {
    std::vector<DamageMember> members;
    for (Index n : r.resolutions)
      for (Real d : r.eigenstrain_steps)
        for (auto s : r.seeds) members.push_back({n, d, s});

    std::vector<MemberResult> results(members.size());
    parallel_for(members.size(), [&](std::size_t i) { results[i] = run_damage_member(r, members[i], opt); });

    Outcome o;
    auto out = open_out(opt.out / "ensemble.csv");
    out.precision(17);
    out << "member,resolution,eigenstrain_step,seed,step,sum_eigenstrain,stiffness_ratio,damaged_qp_count\n";
    json list = json::array();
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (const auto & row : results[i].curve.rows) {
        out << members[i].name() << ',' << members[i].resolution << ',' << members[i].step << ','
            << members[i].seed << ',' << row.step << ',' << row.sum_eigenstrain << ','
            << row.stiffness_ratio << ',' << row.damaged_qp_count << '\n';
      }
      list.push_back(results[i].summary);
      if (!results[i].curve.complete && o.failure.empty()) {
        o.failure = members[i].name() + ": " + results[i].curve.status;
      }
    }
    o.summary = {{"experiment", "damage_rve"}, {"members", list}};
    if (opt.check_projector) {
      json checks = json::array();
      for (Index n : r.resolutions) {
        checks.push_back(projector_report(GridShape{n, n, r.lx, r.ly, scheme_quad_points(r.scheme)},
                                          r.scheme, 2, 0));
      }
      write_json(opt.out / "projector_check.json", checks);
    }
    if (!o.failure.empty()) o.exit_code = 2;
    return o;
  }

  /* ---------------------------------------------------------------------- */
  inline Outcome run_projector(const ProjectorRun & r, const RunOptions & opt) {
    Outcome o;
    json checks = json::array();
    bool ok = true;
    for (const auto & [nx, ny] : r.grids) {
      for (auto s : r.schemes) {
        const ProjectorCheck c =
            check_projector(s, GridShape{nx, ny, 1., 1., scheme_quad_points(s)}, r.samples, r.seed);
        ok = ok && c.passed();
        checks.push_back(to_json(c));
      }
    }
    write_json(opt.out / "projector_check.json", checks);
    std::cout << checks.dump(2) << '\n';
    o.summary = {{"experiment", "projector_check"}, {"passed", ok}, {"checks", checks}};
    if (!ok) {
      o.exit_code = 2;
      o.failure = "projector invariants violated";
    }
    return o;
  }

}  // namespace homog::cli
