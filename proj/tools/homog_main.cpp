// Command line driver: `homog solve <config.json>` and `homog plot <run_dir>`.

#include "plots.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>
#include <fftw3.h>

#include <chrono>
#include <iomanip>

namespace {

  using namespace homog;
  using namespace homog::cli;

  constexpr const char * version = "1.0.0";

  enum Exit { Ok = 0, ConfigFailure = 1, Divergence = 2 };

  // stderr lines read "homog:<level>:<kind>: message"
  void report(const char * level, const char * kind, const std::string & msg) {
    std::cerr << "homog:" << level << ':' << kind << ": " << msg << '\n';
  }

  std::string sha256_hex(const std::string & bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) {
      throw std::runtime_error("sha256 failed");
    }
    std::ostringstream o;
    for (unsigned i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return o.str();
  }

  json versions() {
    return {{"homog", version},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"fftw", std::string(fftw_version)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__},
            {"cxx_standard", __cplusplus}};
  }

  struct SolveArgs {
    std::string config;
    std::string out;
    bool trace{false};
    bool check_projector{false};
    std::optional<std::uint64_t> seed;
  };

  int solve(const SolveArgs & a, const std::vector<std::string> & argv) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    std::string raw;
    try {
      std::ifstream in(a.config, std::ios::binary);
      if (!in) throw ConfigError("cannot read " + a.config);
      raw.assign(std::istreambuf_iterator<char>(in), {});
      json doc;
      try {
        doc = json::parse(raw);
      } catch (const json::parse_error & e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
      }
      cfg = parse_config(doc, a.seed);
      if (!a.out.empty()) cfg.output_dir = a.out;
    } catch (const ConfigError & e) {
      report("error", "config", e.what());
      return ConfigFailure;
    }

    RunOptions opt{cfg.output_dir, a.trace, a.check_projector};
    Outcome outcome;
    try {
      fs::create_directories(opt.out);
      switch (cfg.experiment) {
        case Experiment::Spring1d:
          if (a.check_projector) report("warning", "flag", "--check-projector ignored: spring1d has no grid");
          outcome = run_spring(cfg.spring, opt);
          break;
        case Experiment::Eshelby: outcome = run_eshelby(cfg.eshelby, opt); break;
        case Experiment::DamageRve: outcome = run_damage(cfg.damage, opt); break;
        case Experiment::ProjectorCheck: outcome = run_projector(cfg.projector, opt); break;
      }
    } catch (const ConfigError & e) {
      report("error", "config", e.what());
      return ConfigFailure;
    } catch (const MicrostructureError & e) {
      report("error", "config", std::string("microstructure: ") + e.what());
      return ConfigFailure;
    } catch (const SolverError & e) {
      report("error", "divergence", e.what());
      return Divergence;
    } catch (const std::exception & e) {
      report("error", "runtime", e.what());
      return Divergence;
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"experiment", to_string(cfg.experiment)},
                  {"config_path", a.config},
                  {"config_sha256", sha256_hex(raw)},
                  {"config", cfg.document},
                  {"seed", cfg.seed},
                  {"seed_override", a.seed ? json(*a.seed) : json(nullptr)},
                  {"flags", {{"trace", a.trace}, {"check_projector", a.check_projector}}},
                  {"command", argv},
                  {"versions", versions()},
                  {"threads_cap", std::getenv("HOMOG_THREADS") ? json(std::getenv("HOMOG_THREADS")) : json(nullptr)},
                  {"wall_time_s", wall},
                  {"exit_code", outcome.exit_code}};
    try {
      write_json(opt.out / "summary.json", outcome.summary);
      write_json(opt.out / "manifest.json", manifest);
    } catch (const std::exception & e) {
      report("error", "io", e.what());
      return Divergence;
    }
    if (outcome.exit_code == Divergence) report("error", "divergence", outcome.failure);
    std::cout << "wrote " << opt.out.string() << " (" << std::fixed << std::setprecision(1) << wall
              << " s)\n";
    return outcome.exit_code;
  }

  int plot(const std::string & dir) {
    try {
      for (const auto & p : emit_plots(dir)) std::cout << "wrote " << p.string() << '\n';
      return Ok;
    } catch (const MissingInputs & e) {
      report("error", "input", e.what());
      return ConfigFailure;
    } catch (const std::exception & e) {
      report("error", "input", e.what());
      return ConfigFailure;
    }
  }

}  // namespace

int main(int argc, char ** argv) {
  CLI::App app{"FFT-accelerated periodic homogenization with a trust-region Newton-CG solver"};
  app.set_version_flag("--version", version);
  app.require_subcommand(1);

  SolveArgs sa;
  std::uint64_t seed = 0;
  auto * solve_cmd = app.add_subcommand("solve", "run the experiment described by a JSON config");
  solve_cmd->add_option("config", sa.config, "configuration file")->required();
  solve_cmd->add_option("--out", sa.out, "output directory (overrides output_dir)");
  solve_cmd->add_flag("--trace", sa.trace, "write per-iteration Newton traces");
  solve_cmd->add_flag("--check-projector", sa.check_projector, "write the projector self-test report");
  auto * seed_opt = solve_cmd->add_option("--seed", seed, "override the configured seed");

  std::string run_dir;
  auto * plot_cmd = app.add_subcommand("plot", "render SVG plots of a completed run");
  plot_cmd->add_option("run_dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ConfigFailure;
  }
  if (*seed_opt) sa.seed = seed;

  if (*solve_cmd) return solve(sa, std::vector<std::string>(argv, argv + argc));
  return plot(run_dir);
}
