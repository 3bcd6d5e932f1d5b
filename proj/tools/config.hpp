/**
 * @file   config.hpp
 *
 * @brief  Run configuration: JSON documents parsed into typed settings with
 *         unknown keys rejected and ranges validated before any compute.
 */
#pragma once

#include "homog/damage_study.hpp"
#include "homog/spring1d.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <set>

namespace homog::cli {

  using nlohmann::json;

  class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
  };

  /**
   * Reads the keys of one JSON object, remembering which were consumed so
   * that leftovers can be reported as unknown.
   */
  class Section {
   public:
    Section(const json & j, std::string path) : j_{j}, path_{std::move(path)} {
      if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string & key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string & key, const T & fallback) {
      if (!j_.contains(key)) {
        seen_.insert(key);
        return fallback;
      }
      return this->require<T>(key);
    }

    template <class T>
    T require(const std::string & key) {
      seen_.insert(key);
      if (!j_.contains(key)) throw ConfigError(where(key) + ": missing");
      try {
        return j_.at(key).get<T>();
      } catch (const json::exception & e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }

    Section section(const std::string & key) {
      seen_.insert(key);
      static const json empty = json::object();
      return Section(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
    }

    const json & raw(const std::string & key) {
      seen_.insert(key);
      return j_.at(key);
    }

    void finish() const {
      for (auto it = j_.begin(); it != j_.end(); ++it) {
        if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
      }
    }

    std::string where(const std::string & key = "") const {
      if (key.empty()) return path_.empty() ? "<root>" : path_;
      return path_.empty() ? key : path_ + "." + key;
    }

   private:
    const json & j_;
    std::string path_;
    std::set<std::string> seen_{};
  };

  inline void check(bool ok, const std::string & what) {
    if (!ok) throw ConfigError(what);
  }

  /* ---------------------------------------------------------------------- */
  enum class Experiment { Spring1d, Eshelby, DamageRve, ProjectorCheck };

  inline const char * to_string(Experiment e) {
    switch (e) {
      case Experiment::Spring1d: return "spring1d";
      case Experiment::Eshelby: return "eshelby";
      case Experiment::DamageRve: return "damage_rve";
      case Experiment::ProjectorCheck: return "projector_check";
    }
    return "?";
  }

  inline DerivativeScheme parse_scheme(const std::string & s, const std::string & where) {
    if (s == "linear_fe") return DerivativeScheme::LinearFE;
    if (s == "fourier") return DerivativeScheme::Fourier;
    throw ConfigError(where + ": unknown scheme '" + s + "' (linear_fe | fourier)");
  }

  inline const char * scheme_key(DerivativeScheme s) {
    return s == DerivativeScheme::LinearFE ? "linear_fe" : "fourier";
  }

  //! grid object {nx, ny, lx [m], ly [m]}; nq follows the scheme
  inline GridShape parse_grid(Section s, DerivativeScheme scheme) {
    GridShape g;
    g.nx = s.require<Index>("nx");
    g.ny = s.get<Index>("ny", g.nx);
    g.lx = s.get<Real>("lx", 1.);
    g.ly = s.get<Real>("ly", g.lx);
    g.nq = scheme_quad_points(scheme);
    s.finish();
    try {
      g.validate();
    } catch (const std::exception & e) {
      throw ConfigError(s.where() + ": " + e.what());
    }
    return g;
  }

  inline TrustRegionConfig parse_solver(Section s, TrustRegionConfig c) {
    c.R0 = s.get<Real>("R0", c.R0);
    c.Rmax = s.get<Real>("Rmax", c.Rmax);
    c.eta_up = s.get<Real>("eta_up", c.eta_up);
    c.eta_eq = s.get<Real>("eta_eq", c.eta_eq);
    c.eta_nr = s.get<Real>("eta_nr", c.eta_nr);
    const auto norm = s.get<std::string>("residual_norm", c.residual_norm == ResidualNorm::Rms ? "rms" : "absolute");
    check(norm == "rms" || norm == "absolute", s.where("residual_norm") + ": rms | absolute");
    c.residual_norm = norm == "rms" ? ResidualNorm::Rms : ResidualNorm::Absolute;
    c.max_newton = s.get<Index>("max_newton", c.max_newton);
    c.max_rejections = s.get<Index>("max_rejections", c.max_rejections);
    c.krylov.eta_cg = s.get<Real>("eta_cg", c.krylov.eta_cg);
    c.krylov.max_iter = s.get<Index>("cg_max_iter", c.krylov.max_iter);
    c.krylov.reset_threshold = s.get<Real>("cg_reset_threshold", c.krylov.reset_threshold);
    s.finish();
    try {
      c.validate();
      c.krylov.validate();
    } catch (const std::exception & e) {
      throw ConfigError(s.where() + ": " + e.what());
    }
    return c;
  }

  inline nlohmann::json solver_json(const TrustRegionConfig & c) {
    return {{"R0", c.R0},
            {"Rmax", c.Rmax},
            {"eta_up", c.eta_up},
            {"eta_eq", c.eta_eq},
            {"eta_nr", c.eta_nr},
            {"residual_norm", c.residual_norm == ResidualNorm::Rms ? "rms" : "absolute"},
            {"max_newton", c.max_newton},
            {"max_rejections", c.max_rejections},
            {"eta_cg", c.krylov.eta_cg},
            {"cg_max_iter", c.krylov.max_iter},
            {"cg_reset_threshold", c.krylov.reset_threshold}};
  }

  /* ---------------------------------------------------------------------- */
  struct SpringRun {
    spring::SpringSystem system{};
    std::vector<Real> alphas{1., -0.5, -1.};
    spring::Vec2 start{0.11, 0.11};
    spring::SolveConfig solver{};
    Real x0_min{0.};
    Real x0_max{0.4};
    Index points{401};
  };

  struct EshelbyRun {
    DerivativeScheme scheme{DerivativeScheme::LinearFE};
    GridShape grid{127, 127, 1., 1., 2};
    LinearElastic matrix{1., 0.3};
    LinearElastic inclusion{0.1, 0.3};
    Real radius{1. / 16.};  //!< [m]
    Mandel mean_strain{0.01, 0.01, 0.};
    Index steps{1};
    TrustRegionConfig solver{};
  };

  struct DamageRun {
    DerivativeScheme scheme{DerivativeScheme::LinearFE};
    std::vector<Index> resolutions{64};
    Real lx{0.05};
    Real ly{0.05};
    ConcreteProperties materials{};
    MicrostructureParams microstructure{};
    std::vector<Real> eigenstrain_steps{5e-4};
    Real final_eigenstrain{0.01};
    std::vector<std::uint64_t> seeds{1};
    TrustRegionConfig solver{};
    bool dump_fields{true};
  };

  struct ProjectorRun {
    std::vector<std::pair<Index, Index>> grids{{8, 8}, {9, 9}, {16, 32}};
    std::vector<DerivativeScheme> schemes{DerivativeScheme::Fourier, DerivativeScheme::LinearFE};
    Index samples{4};
    std::uint64_t seed{0};
  };

  struct RunConfig {
    Experiment experiment{Experiment::Spring1d};
    std::filesystem::path output_dir{};
    std::uint64_t seed{0};
    SpringRun spring{};
    EshelbyRun eshelby{};
    DamageRun damage{};
    ProjectorRun projector{};
    json document{};
  };

  inline TrustRegionConfig eshelby_solver_defaults() {
    TrustRegionConfig c;
    c.eta_eq = 1e-10;
    return c;
  }

  inline TrustRegionConfig damage_solver_defaults() {
    TrustRegionConfig c;
    c.eta_eq = 1e-2;
    c.max_newton = 500;
    return c;
  }

  inline Mandel parse_strain(Section s) {
    const Real xx = s.get<Real>("xx", 0.), yy = s.get<Real>("yy", 0.), xy = s.get<Real>("xy", 0.);
    s.finish();
    return Mandel{xx, yy, sqrt2 * xy};
  }

  inline PhaseProperties parse_phase(Section s, PhaseProperties p, bool damaging) {
    p.young = s.get<Real>("young", p.young);
    p.poisson = s.get<Real>("poisson", p.poisson);
    if (damaging) {
      p.fracture_energy = s.get<Real>("fracture_energy", p.fracture_energy);
      p.tensile_strength = s.get<Real>("tensile_strength", p.tensile_strength);
      check(p.fracture_energy > 0. && p.tensile_strength > 0.,
            s.where() + ": fracture_energy and tensile_strength must be positive");
    }
    s.finish();
    check(p.young > 0. && p.poisson > -1. && p.poisson < 0.5,
          s.where() + ": need young > 0 and -1 < poisson < 0.5");
    return p;
  }

  inline void parse_spring(Section & root, SpringRun & r) {
    Section s = root.section("spring");
    r.system.k = s.get<Real>("k", r.system.k);
    r.system.gamma0 = s.get<Real>("gamma0", r.system.gamma0);
    r.system.xbar = s.get<Real>("xbar", r.system.xbar);
    r.alphas = s.get<std::vector<Real>>("alphas", r.alphas);
    const auto start = s.get<std::vector<Real>>("x_start", {r.start(0), r.start(1)});
    check(start.size() == 2, s.where("x_start") + ": expected two elongations");
    r.start = spring::Vec2{start[0], start[1]};
    s.finish();
    check(!r.alphas.empty(), s.where("alphas") + ": empty");
    for (Real a : r.alphas) {
      r.system.alpha = a;
      try {
        r.system.validate();
      } catch (const std::exception & e) {
        throw ConfigError(s.where() + ": " + e.what());
      }
    }

    Section v = root.section("solver");
    r.solver.R0 = v.get<Real>("R0", r.solver.R0);
    r.solver.Rmax = v.get<Real>("Rmax", r.solver.Rmax);
    r.solver.eta_up = v.get<Real>("eta_up", r.solver.eta_up);
    r.solver.eta_eq = v.get<Real>("eta_eq", r.solver.eta_eq);
    r.solver.max_newton = v.get<Index>("max_newton", r.solver.max_newton);
    r.solver.max_rejections = v.get<Index>("max_rejections", r.solver.max_rejections);
    v.finish();
    check(r.solver.R0 > 0. && r.solver.Rmax >= r.solver.R0, v.where() + ": need 0 < R0 <= Rmax");
    check(r.solver.eta_eq > 0. && r.solver.max_newton > 0 && r.solver.max_rejections > 0,
          v.where() + ": need eta_eq > 0 and positive iteration caps");

    Section l = root.section("landscape");
    r.x0_min = l.get<Real>("x0_min", r.x0_min);
    r.x0_max = l.get<Real>("x0_max", r.x0_max);
    r.points = l.get<Index>("points", r.points);
    l.finish();
    check(r.x0_max > r.x0_min && r.points >= 2, l.where() + ": need x0_max > x0_min, points >= 2");
  }

  inline void parse_eshelby(Section & root, EshelbyRun & r) {
    r.scheme = parse_scheme(root.get<std::string>("scheme", "linear_fe"), "scheme");
    r.grid = parse_grid(root.section("grid"), r.scheme);
    Section m = root.section("matrix");
    r.matrix.young = m.get<Real>("young", r.matrix.young);
    r.matrix.poisson = m.get<Real>("poisson", r.matrix.poisson);
    m.finish();
    Section i = root.section("inclusion");
    r.inclusion.young = i.get<Real>("young", r.inclusion.young);
    r.inclusion.poisson = i.get<Real>("poisson", r.inclusion.poisson);
    r.radius = i.get<Real>("radius", r.grid.lx / 16.);
    i.finish();
    try {
      r.matrix.validate();
      r.inclusion.validate();
    } catch (const std::exception & e) {
      throw ConfigError(std::string("materials: ") + e.what());
    }
    check(r.radius > 0. && 2. * r.radius < std::min(r.grid.lx, r.grid.ly),
          "inclusion.radius: must be positive and fit in the cell");
    Section l = root.section("load");
    r.mean_strain = parse_strain(l.section("mean_strain"));
    r.steps = l.get<Index>("steps", r.steps);
    l.finish();
    check(r.steps >= 1, "load.steps: must be >= 1");
    r.solver = parse_solver(root.section("solver"), eshelby_solver_defaults());
  }

  inline void parse_damage(Section & root, DamageRun & r) {
    r.scheme = parse_scheme(root.get<std::string>("scheme", "linear_fe"), "scheme");
    Section g = root.section("grid");
    if (g.has("resolutions")) {
      r.resolutions = g.require<std::vector<Index>>("resolutions");
    } else {
      r.resolutions = {g.get<Index>("n", 64)};
    }
    r.lx = g.get<Real>("lx", r.lx);
    r.ly = g.get<Real>("ly", r.lx);
    g.finish();
    check(!r.resolutions.empty(), "grid.resolutions: empty");
    for (Index n : r.resolutions) check(n >= 2, "grid: resolutions must be >= 2");
    check(r.lx > 0. && r.ly > 0., "grid: lx, ly must be positive [m]");

    Section m = root.section("materials");
    r.materials.paste = parse_phase(m.section("paste"), r.materials.paste, true);
    r.materials.aggregate = parse_phase(m.section("aggregate"), r.materials.aggregate, true);
    r.materials.gel = parse_phase(m.section("gel"), r.materials.gel, false);
    m.finish();

    Section s = root.section("microstructure");
    auto & p = r.microstructure;
    p.aggregate_fraction = s.get<Real>("aggregate_fraction", p.aggregate_fraction);
    p.fuller_exponent = s.get<Real>("fuller_exponent", p.fuller_exponent);
    p.radius_min = s.get<Real>("radius_min", p.radius_min);
    p.radius_max = s.get<Real>("radius_max", p.radius_max);
    p.aspect_min = s.get<Real>("aspect_min", p.aspect_min);
    p.aspect_max = s.get<Real>("aspect_max", p.aspect_max);
    p.gap = s.get<Real>("gap", p.gap);
    p.gel_fraction = s.get<Real>("gel_fraction", p.gel_fraction);
    p.gel_grid = s.get<Index>("gel_grid", p.gel_grid);
    p.max_attempts = s.get<Index>("max_attempts", p.max_attempts);
    p.fraction_tolerance = s.get<Real>("fraction_tolerance", p.fraction_tolerance);
    s.finish();
    try {
      p.validate();
    } catch (const std::exception & e) {
      throw ConfigError(std::string("microstructure: ") + e.what());
    }
    for (Index n : r.resolutions) {
      check(n % p.gel_grid == 0, "grid: resolution " + std::to_string(n) +
                                     " is not a multiple of microstructure.gel_grid");
    }

    Section l = root.section("load");
    if (l.has("eigenstrain_steps")) {
      r.eigenstrain_steps = l.require<std::vector<Real>>("eigenstrain_steps");
    } else {
      r.eigenstrain_steps = {l.get<Real>("eigenstrain_step", 5e-4)};
    }
    r.final_eigenstrain = l.get<Real>("final_eigenstrain", r.final_eigenstrain);
    l.finish();
    check(!r.eigenstrain_steps.empty(), "load.eigenstrain_steps: empty");
    for (Real d : r.eigenstrain_steps) {
      check(d > 0. && d <= r.final_eigenstrain,
            "load: eigenstrain steps must lie in (0, final_eigenstrain]");
    }

    if (root.has("seeds")) {
      r.seeds = root.require<std::vector<std::uint64_t>>("seeds");
      check(!r.seeds.empty(), "seeds: empty");
    }
    r.solver = parse_solver(root.section("solver"), damage_solver_defaults());
    r.dump_fields = root.get<bool>("dump_fields", r.dump_fields);

    for (Index n : r.resolutions) {
      const Real h = std::min(r.lx, r.ly) / static_cast<Real>(n);
      for (const auto * ph : {&r.materials.paste, &r.materials.aggregate}) {
        try {
          regularize_softening(ph->fracture_energy, ph->tensile_strength, ph->young, h);
        } catch (const std::exception & e) {
          throw ConfigError(std::string("materials: ") + e.what());
        }
      }
    }
  }

  inline void parse_projector(Section & root, ProjectorRun & r) {
    if (root.has("grids")) {
      r.grids.clear();
      for (const auto & g : root.raw("grids")) {
        check(g.is_array() && g.size() == 2 && g[0].is_number_integer() && g[1].is_number_integer(),
              "grids: expected [[nx, ny], ...]");
        r.grids.emplace_back(g[0].get<Index>(), g[1].get<Index>());
        check(r.grids.back().first >= 2 && r.grids.back().second >= 2, "grids: need nx, ny >= 2");
      }
    }
    if (root.has("schemes")) {
      r.schemes.clear();
      for (const auto & s : root.require<std::vector<std::string>>("schemes")) {
        r.schemes.push_back(parse_scheme(s, "schemes"));
      }
    }
    r.samples = root.get<Index>("samples", r.samples);
    check(r.samples >= 1, "samples: must be >= 1");
  }

  /**
   * Parses and validates a configuration document. `seed_override` replaces
   * the seed (and the damage ensemble) when given.
   */
  inline RunConfig parse_config(const json & doc, std::optional<std::uint64_t> seed_override = {}) {
    RunConfig c;
    c.document = doc;
    Section root(doc, "");
    const auto name = root.require<std::string>("experiment");
    if (name == "spring1d") c.experiment = Experiment::Spring1d;
    else if (name == "eshelby") c.experiment = Experiment::Eshelby;
    else if (name == "damage_rve") c.experiment = Experiment::DamageRve;
    else if (name == "projector_check") c.experiment = Experiment::ProjectorCheck;
    else throw ConfigError("experiment: unknown '" + name + "' (spring1d | eshelby | damage_rve | projector_check)");
    c.output_dir = root.get<std::string>("output_dir", std::string("runs/") + name);
    c.seed = root.get<std::uint64_t>("seed", 0);

    switch (c.experiment) {
      case Experiment::Spring1d: parse_spring(root, c.spring); break;
      case Experiment::Eshelby: parse_eshelby(root, c.eshelby); break;
      case Experiment::DamageRve:
        if (!root.has("seeds") && doc.contains("seed")) c.damage.seeds = {c.seed};
        parse_damage(root, c.damage);
        break;
      case Experiment::ProjectorCheck: parse_projector(root, c.projector); break;
    }
    root.finish();
    if (seed_override) {
      c.seed = *seed_override;
      c.damage.seeds = {*seed_override};
    }
    c.projector.seed = c.seed;
    return c;
  }

}  // namespace homog::cli
