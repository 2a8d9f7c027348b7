#pragma once

#include <algorithm>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "handy/equilibrium.hpp"
#include "handy/errors.hpp"
#include "handy/harness/config.hpp"
#include "handy/harness/io.hpp"
#include "handy/hypotheses.hpp"
#include "handy/integrator.hpp"

namespace handy::harness {

namespace fs = std::filesystem;

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kCheckFailed = 1, kInputError = 2, kNumericalFailure = 3 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteState:
    case ErrorCode::NoConvergence:
    case ErrorCode::NegativeRadicand:
    case ErrorCode::BranchViolated:
    case ErrorCode::KinkCrossedDuringSegment:
      return kNumericalFailure;
    default:
      return kInputError;
  }
}

/// Exit code for a finished report: 2 if any check hit a precondition error,
/// else 1 if any non-vacuous check failed, else 0.
inline int exit_code_for(const HypothesisReport& report) {
  bool failed = false;
  for (const auto& r : report) {
    if (r.error) return kInputError;
    if (!r.vacuous && !r.pass) failed = true;
  }
  return failed ? kCheckFailed : kOk;
}

struct SimulationOutput {
  Trajectory trajectory;
  CollapseEvent collapse;
  json config;
  json summary;
};

inline SimulationOutput simulate(const ScenarioConfig& cfg) {
  const Parameters p = cfg.validated();
  SimulationOutput out;
  out.config = to_json(cfg);
  out.trajectory = integrate(cfg.initial, p, cfg.variant, cfg.integration);
  out.collapse = detect_collapse(out.trajectory, cfg.threshold());
  out.summary = {{"record", "summary"},
                 {"config", out.config},
                 {"collapse", to_json(out.collapse)},
                 {"final_time", out.trajectory.back().t},
                 {"final_state", state_json(out.trajectory.back().state)},
                 {"clamp_count", out.trajectory.clamp_count},
                 {"samples", out.trajectory.size()}};
  return out;
}

/// simulate: trajectory CSV plus summary record in out_dir.
inline SimulationOutput cli_simulate(const ScenarioConfig& cfg, const fs::path& out_dir) {
  SimulationOutput out = simulate(cfg);
  write_trajectory_csv(out_dir / cfg.outputs.trajectory, out.trajectory, out.config);
  write_atomic(out_dir / cfg.outputs.summary, out.summary.dump(2) + "\n");
  return out;
}

/// check: runs checks over a trajectory and writes the report records.
/// Returns the exit code.
inline int cli_check(const Trajectory& traj, const ScenarioConfig& cfg,
                     std::vector<std::string> checks, const fs::path& report_path,
                     HypothesisReport* report_out = nullptr) {
  if (checks.empty()) checks = cfg.checks.empty() ? all_check_names() : cfg.checks;
  for (const auto& c : checks) {
    if (!is_check_name(c)) throw Error(ErrorCode::ConfigParse, "unknown check '" + c + "'");
  }
  if (traj.empty()) throw Error(ErrorCode::MissingColumn, "trajectory has no samples");
  const Parameters p = cfg.validated();
  HypothesisReport report = run_checks(traj, p, checks);
  write_atomic(report_path, report_to_jsonl(report, to_json(cfg)));
  const int code = exit_code_for(report);
  if (report_out) *report_out = std::move(report);
  return code;
}

/// equilibrium: compares the closed form and the numerical root; writes one
/// record. Exit 3 when no numerical equilibrium was found.
inline int cli_equilibrium(const ScenarioConfig& cfg, const fs::path& out_dir,
                           EquilibriumResult* result_out = nullptr) {
  if (cfg.variant != Variant::mobility) {
    throw Error(ErrorCode::VariantParameterMismatch, "equilibrium needs variant = mobility");
  }
  const Parameters p = cfg.validated();
  EquilibriumResult r = compare_equilibria(p, cfg.equilibrium_guess);
  json rec = to_json(r);
  rec["config"] = to_json(cfg);
  write_atomic(out_dir / cfg.outputs.equilibrium, rec.dump(2) + "\n");
  const int code = r.numerical ? kOk : kNumericalFailure;
  if (result_out) *result_out = std::move(r);
  return code;
}

struct SweepSpec {
  std::string axis;  ///< dotted config path, e.g. params.kappa
  std::vector<json> values;
  json template_config;
  std::vector<std::string> checks;  ///< empty: the template's checks
  std::string table{"sweep.csv"};
};

struct SweepRow {
  json value;
  std::optional<double> t_c_collapse;
  std::optional<double> t_e_collapse;
  std::optional<double> min_v_ratio;
  std::size_t checks_pass{0};
  std::size_t checks_fail{0};
  std::size_t checks_vacuous{0};
  std::size_t checks_error{0};
  std::string error;
};

inline SweepSpec parse_sweep_spec(const json& j, const fs::path& base_dir = {}) {
  SweepSpec s;
  try {
    s.axis = j.at("axis").get<std::string>();
    for (const auto& v : j.at("values")) s.values.push_back(v);
    if (j.contains("template")) {
      s.template_config = j.at("template");
    } else if (j.contains("template_path")) {
      s.template_config = read_json_file(base_dir / j.at("template_path").get<std::string>());
    } else {
      throw Error(ErrorCode::ConfigParse, "sweep needs 'template' or 'template_path'");
    }
    if (j.contains("checks")) {
      for (const auto& c : j.at("checks")) {
        const auto name = c.get<std::string>();
        if (!is_check_name(name)) throw Error(ErrorCode::ConfigParse, "unknown check '" + name + "'");
        s.checks.push_back(name);
      }
    }
    if (j.contains("outputs")) s.table = j.at("outputs").value("table", s.table);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigParse, e.what());
  }
  return s;
}

inline json to_json(const SweepSpec& s) {
  return {{"axis", s.axis},
          {"values", s.values},
          {"template", s.template_config},
          {"checks", s.checks},
          {"outputs", {{"table", s.table}}}};
}

inline SweepRow run_sweep_point(const SweepSpec& spec, const json& value) {
  SweepRow row;
  row.value = value;
  try {
    json cfg_json = spec.template_config;
    apply_override(cfg_json, spec.axis + "=" + value.dump());
    ScenarioConfig cfg = parse_config(cfg_json);
    // mu = 0 turns the mobility rhs into the plain one.
    if (const auto* ps = std::get_if<ParameterSet>(&cfg.params);
        cfg.variant == Variant::mobility && ps && ps->mu == 0.0) {
      cfg.variant = Variant::handy;
    }
    const SimulationOutput sim = simulate(cfg);
    row.t_c_collapse = sim.collapse.t_c_below;
    row.t_e_collapse = sim.collapse.t_e_below;
    for (const auto& s : sim.trajectory.samples) {
      if (s.v_ratio) row.min_v_ratio = std::min(row.min_v_ratio.value_or(*s.v_ratio), *s.v_ratio);
    }
    const auto& names = spec.checks.empty() ? cfg.checks : spec.checks;
    for (const auto& r : run_checks(sim.trajectory, cfg.validated(), names)) {
      if (r.error) {
        ++row.checks_error;
      } else if (r.vacuous) {
        ++row.checks_vacuous;
      } else if (r.pass) {
        ++row.checks_pass;
      } else {
        ++row.checks_fail;
      }
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

/// One row per value, in input order. Points run concurrently in batches of
/// the hardware thread count; results do not depend on scheduling.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::vector<SweepRow> rows(spec.values.size());
  const std::size_t batch = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < rows.size(); start += batch) {
    const std::size_t stop = std::min(rows.size(), start + batch);
    std::vector<std::future<SweepRow>> jobs;
    for (std::size_t i = start; i < stop; ++i) {
      jobs.push_back(std::async(std::launch::async, run_sweep_point, std::cref(spec),
                                std::cref(spec.values[i])));
    }
    for (std::size_t i = start; i < stop; ++i) rows[i] = jobs[i - start].get();
  }
  return rows;
}

inline std::string sweep_to_csv(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
  std::string out = std::string(kConfigPrefix) + to_json(spec).dump() + "\n";
  out += "value,t_c_collapse,t_e_collapse,min_v_ratio,checks_pass,checks_fail,"
         "checks_vacuous,checks_error,error\n";
  auto opt = [](const std::optional<double>& x) { return x ? fmt17(*x) : std::string(); };
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += r.value.is_number() ? fmt17(r.value.get<double>()) : r.value.dump();
    out += "," + opt(r.t_c_collapse) + "," + opt(r.t_e_collapse) + "," + opt(r.min_v_ratio) +
           "," + std::to_string(r.checks_pass) + "," + std::to_string(r.checks_fail) + "," +
           std::to_string(r.checks_vacuous) + "," + std::to_string(r.checks_error) + "," + err +
           "\n";
  }
  return out;
}

inline std::vector<SweepRow> cli_sweep(const SweepSpec& spec, const fs::path& out_dir) {
  auto rows = run_sweep(spec);
  write_atomic(out_dir / spec.table, sweep_to_csv(spec, rows));
  return rows;
}

/// The scenarios whose CSVs feed the figure layouts.
inline const std::vector<std::string>& figure_scenarios() {
  static const std::vector<std::string> names = {"fig1-left", "fig1-right", "mobility"};
  return names;
}

/// figure-data: simulates the figure scenarios found in scenario_dir and
/// writes <name>.csv for each, plus the figure layout file, into out_dir.
inline void cli_figure_data(const fs::path& scenario_dir, const fs::path& out_dir,
                            const std::vector<std::string>& overrides = {}) {
  for (const auto& name : figure_scenarios()) {
    const ScenarioConfig cfg = load_config(scenario_dir / (name + ".json"), overrides);
    const SimulationOutput sim = simulate(cfg);
    write_trajectory_csv(out_dir / (name + ".csv"), sim.trajectory, sim.config);
  }
  const fs::path layout = scenario_dir / "figures.json";
  if (fs::exists(layout)) write_atomic(out_dir / "figures.json", read_json_file(layout).dump(2) + "\n");
}

}  // namespace handy::harness
