// Command-line front end: simulate, check, equilibrium, sweep, figure-data.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "handy/harness/app.hpp"

#ifndef HANDY_SCENARIO_DIR
#define HANDY_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace handy;
using namespace handy::harness;

namespace {

struct CommonOptions {
  std::string config;
  std::string out{"."};
  std::vector<std::string> sets;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<double> threshold;

  void attach(CLI::App* cmd, bool config_required) {
    auto* opt = cmd->add_option("--config", config, "config file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--out", out, "output directory")->capture_default_str();
    cmd->add_option("--set", sets, "override a config value: dotted.path=value (repeatable)");
    cmd->add_option("--dt", dt, "integration step");
    cmd->add_option("--t-end", t_end, "integration horizon");
    cmd->add_option("--threshold", threshold, "collapse threshold");
  }

  std::vector<std::string> overrides() const {
    std::vector<std::string> all = sets;
    if (dt) all.push_back("integration.dt=" + fmt17(*dt));
    if (t_end) all.push_back("integration.t_end=" + fmt17(*t_end));
    if (threshold) all.push_back("integration.collapse_threshold=" + fmt17(*threshold));
    return all;
  }

  ScenarioConfig load() const { return load_config(config, overrides()); }
};

void print_collapse(const CollapseEvent& ev) {
  auto show = [](const std::optional<double>& t) { return t ? fmt17(*t) : std::string("none"); };
  std::cout << "collapse: C below at " << show(ev.t_c_below) << ", E below at "
            << show(ev.t_e_below) << "\n";
}

void print_report(const HypothesisReport& report) {
  for (const auto& r : report) {
    const char* status = r.error ? "ERROR" : (r.vacuous ? "VACUOUS" : (r.pass ? "PASS" : "FAIL"));
    std::cout << status << "  " << r.name << "  worst=" << fmt17(r.worst_violation)
              << " tol=" << fmt17(r.tolerance);
    if (!r.detail.empty()) std::cout << "  " << r.detail;
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elite-dominated population model: simulation and hypothesis checks"};
  app.require_subcommand(1);

  CommonOptions sim_opt;
  auto* sim = app.add_subcommand("simulate", "integrate a scenario, write CSV and summary");
  sim_opt.attach(sim, true);

  CommonOptions chk_opt;
  std::string trajectory_path;
  std::vector<std::string> check_names;
  auto* chk = app.add_subcommand("check", "run hypothesis checks on a trajectory CSV or config");
  chk_opt.attach(chk, false);
  chk->add_option("--trajectory", trajectory_path, "trajectory CSV written by simulate");
  chk->add_option("--checks", check_names, "checks to run (default: config list or all)")
      ->delimiter(',');

  CommonOptions eq_opt;
  auto* eq = app.add_subcommand("equilibrium", "closed-form vs numerical mobility equilibrium");
  eq_opt.attach(eq, true);

  CommonOptions sw_opt;
  auto* sw = app.add_subcommand("sweep", "run a parameter sweep spec");
  sw_opt.attach(sw, true);

  CommonOptions fig_opt;
  std::string scenario_dir = HANDY_SCENARIO_DIR;
  auto* fig = app.add_subcommand("figure-data", "write the CSVs behind the figure layouts");
  fig_opt.attach(fig, false);
  fig->add_option("--scenarios", scenario_dir, "directory with the shipped scenario files")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*sim) {
      const ScenarioConfig cfg = sim_opt.load();
      const SimulationOutput out = cli_simulate(cfg, sim_opt.out);
      std::cout << "wrote " << (fs::path(sim_opt.out) / cfg.outputs.trajectory).string() << " ("
                << out.trajectory.size() << " samples, clamps " << out.trajectory.clamp_count
                << ")\n";
      print_collapse(out.collapse);
      return kOk;
    }
    if (*chk) {
      if (trajectory_path.empty() && chk_opt.config.empty()) {
        std::cerr << "check needs --trajectory and/or --config\n";
        return kInputError;
      }
      Trajectory traj;
      std::optional<ScenarioConfig> cfg;
      if (!chk_opt.config.empty()) cfg = chk_opt.load();
      if (!trajectory_path.empty()) {
        LoadedTrajectory loaded = read_trajectory_csv(trajectory_path);
        traj = std::move(loaded.trajectory);
        if (!cfg) {
          if (!loaded.config) {
            std::cerr << "trajectory has no embedded config; pass --config\n";
            return kInputError;
          }
          json j = *loaded.config;
          for (const auto& o : chk_opt.overrides()) apply_override(j, o);
          cfg = parse_config(j);
        }
      } else {
        traj = simulate(*cfg).trajectory;
      }
      HypothesisReport report;
      const fs::path report_path = fs::path(chk_opt.out) / cfg->outputs.report;
      const int code = cli_check(traj, *cfg, check_names, report_path, &report);
      print_report(report);
      std::cout << "wrote " << report_path.string() << "\n";
      return code;
    }
    if (*eq) {
      const ScenarioConfig cfg = eq_opt.load();
      EquilibriumResult r;
      const int code = cli_equilibrium(cfg, eq_opt.out, &r);
      std::cout << to_json(r).dump(2) << "\n";
      return code;
    }
    if (*sw) {
      json j = read_json_file(sw_opt.config);
      SweepSpec spec = parse_sweep_spec(j, fs::path(sw_opt.config).parent_path());
      for (const auto& o : sw_opt.overrides()) apply_override(spec.template_config, o);
      const auto rows = cli_sweep(spec, sw_opt.out);
      // Echo the table without its config comment line.
      const std::string table = sweep_to_csv(spec, rows);
      std::cout << table.substr(table.find('\n') + 1);
      std::cout << "wrote " << (fs::path(sw_opt.out) / spec.table).string() << "\n";
      return kOk;
    }
    if (*fig) {
      cli_figure_data(scenario_dir, fig_opt.out, fig_opt.overrides());
      std::cout << "wrote figure data to " << fig_opt.out << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
