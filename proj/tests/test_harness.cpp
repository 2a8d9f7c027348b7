#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <sys/wait.h>

#include "handy/harness/app.hpp"

using namespace handy;
using namespace handy::harness;

namespace {

fs::path scenario(const std::string& name) {
  return fs::path(HANDY_SCENARIO_DIR) / (name + ".json");
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("handy_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HANDY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json minimal() {
  return {{"initial", {{"b_env", 300.0}, {"b_stor", 0.0}, {"c", 1000.0}, {"e", 1.0}}}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  json j = minimal();
  apply_override(j, "params.kappa=2.5");
  apply_override(j, "integration.dt=0.05");
  apply_override(j, "name=custom");
  const ScenarioConfig cfg = parse_config(j);
  const auto& p = std::get<ParameterSet>(cfg.params);
  EXPECT_DOUBLE_EQ(p.kappa, 2.5);
  EXPECT_DOUBLE_EQ(p.nu, 1.67e-5);
  EXPECT_DOUBLE_EQ(cfg.integration.dt, 0.05);
  EXPECT_EQ(cfg.name, "custom");
  EXPECT_DOUBLE_EQ(cfg.threshold(), 1e-3);
}

TEST(Config, Rejections) {
  json j = minimal();
  j["params"] = {{"rho", 200.0}, {"rho_inv", 0.005}};
  EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::ConfigParse);

  j = minimal();
  j["params"] = {{"kapa", 2.0}};
  EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::ConfigParse);

  j = minimal();
  j["checks"] = {"containment", "bogus"};
  EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::ConfigParse);

  EXPECT_EQ(code_of([] { parse_config(json::object()); }), ErrorCode::ConfigParse);
  json empty = json::object();
  EXPECT_EQ(code_of([&] { apply_override(empty, "no_equals_sign"); }), ErrorCode::ConfigParse);
}

TEST(Config, EchoIsFixedPoint) {
  for (const char* name : {"fig1-left", "fig1-right", "mobility", "handy-star"}) {
    const ScenarioConfig cfg = load_config(scenario(name), {});
    const json echo = to_json(cfg);
    EXPECT_EQ(to_json(parse_config(echo)), echo) << name;
    EXPECT_NO_THROW(cfg.validated()) << name;
  }
}

TEST(Config, ScheduleFromFunctionObject) {
  const ScenarioConfig cfg = load_config(scenario("handy-star"), {});
  EXPECT_EQ(cfg.variant, Variant::handy_star);
  const auto& s = std::get<ParameterSchedule>(cfg.params);
  EXPECT_NEAR(s.gamma.supremum(), 0.015, 1e-15);
}

TEST(Csv, RoundTripIsExact) {
  const ScenarioConfig cfg = load_config(scenario("fig1-right"), {"integration.t_end=300"});
  const SimulationOutput sim = simulate(cfg);
  std::istringstream in(trajectory_to_csv(sim.trajectory, sim.config));
  const LoadedTrajectory back = read_trajectory_csv(in);
  ASSERT_TRUE(back.config);
  EXPECT_EQ(*back.config, sim.config);
  ASSERT_EQ(back.trajectory.size(), sim.trajectory.size());
  for (std::size_t i = 0; i < back.trajectory.size(); ++i) {
    const Sample& a = sim.trajectory.samples[i];
    const Sample& b = back.trajectory.samples[i];
    ASSERT_EQ(a.t, b.t);
    ASSERT_EQ(a.state.c, b.state.c);
    ASSERT_EQ(a.state.b_stor, b.state.b_stor);
    ASSERT_EQ(a.flux.g_kz, b.flux.g_kz);
    ASSERT_EQ(a.v_ratio, b.v_ratio);
    ASSERT_EQ(a.rate.e, b.rate.e);
  }
  const Parameters p = cfg.validated();
  const auto names = all_check_names();
  const auto r1 = run_checks(sim.trajectory, p, names);
  const auto r2 = run_checks(back.trajectory, p, names);
  ASSERT_EQ(r1.size(), r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(to_json(r1[i]), to_json(r2[i])) << r1[i].name;
  }
}

TEST(Csv, EmptyVRatioWhenNoElites) {
  const ScenarioConfig cfg = load_config(scenario("fig1-left"), {"integration.t_end=10"});
  const std::string csv = trajectory_to_csv(simulate(cfg).trajectory, to_json(cfg));
  std::istringstream in(csv);
  const LoadedTrajectory back = read_trajectory_csv(in);
  EXPECT_FALSE(back.trajectory.front().v_ratio);
}

TEST(Csv, MissingColumn) {
  std::istringstream in("t,b_env,b_stor,c,e\n0,1,2,3,4\n");
  EXPECT_EQ(code_of([&] { read_trajectory_csv(in); }), ErrorCode::MissingColumn);
}

TEST(Check, FreshCollapseRunPasses) {
  const ScenarioConfig cfg = load_config(scenario("fig1-right"), {});
  const fs::path dir = scratch("check_pass");
  const SimulationOutput sim = cli_simulate(cfg, dir);
  const LoadedTrajectory back = read_trajectory_csv(dir / cfg.outputs.trajectory);
  HypothesisReport rep;
  const int code = cli_check(back.trajectory, cfg, {}, dir / cfg.outputs.report, &rep);
  for (const auto& r : rep) EXPECT_TRUE(r.pass) << r.name << " " << r.detail;
  EXPECT_EQ(code, kOk);
  EXPECT_EQ(rep.size(), 7u);

  // One record per line: config first, then the checks.
  std::istringstream lines(slurp(dir / cfg.outputs.report));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(json::parse(line)["record"], "config");
  int checks = 0;
  while (std::getline(lines, line)) {
    const json rec = json::parse(line);
    EXPECT_EQ(rec["record"], "check");
    EXPECT_TRUE(rec.contains("witness_time"));
    ++checks;
  }
  EXPECT_EQ(checks, 7);
}

TEST(Check, TamperedRatioFails) {
  const ScenarioConfig cfg = load_config(scenario("fig1-right"), {"integration.t_end=300"});
  Trajectory traj = simulate(cfg).trajectory;
  traj.samples[100].v_ratio = *traj.samples[99].v_ratio * 1.01;
  HypothesisReport rep;
  const fs::path dir = scratch("check_tamper");
  EXPECT_EQ(cli_check(traj, cfg, {"lyapunov_ratio"}, dir / "r.jsonl", &rep), kCheckFailed);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_FALSE(rep[0].pass);
}

TEST(Check, NoElitesIsInputError) {
  const ScenarioConfig cfg = load_config(scenario("fig1-left"), {"integration.t_end=300"});
  const Trajectory traj = simulate(cfg).trajectory;
  HypothesisReport rep;
  const fs::path dir = scratch("check_noelite");
  EXPECT_EQ(cli_check(traj, cfg, {}, dir / "r.jsonl", &rep), kInputError);
  for (const auto& r : rep) {
    const bool needs_e = r.name == "rate_ordering" || r.name == "rate_gap" ||
                         r.name == "lyapunov_ratio" || r.name == "contraction";
    EXPECT_EQ(r.error.has_value(), needs_e) << r.name;
    if (r.error) {
      EXPECT_EQ(*r.error, ErrorCode::PopulationZeroAtSample);
    }
  }
}

TEST(Equilibrium, CliRecord) {
  const fs::path dir = scratch("eq");
  const ScenarioConfig cfg = load_config(scenario("mobility"), {"params.nu=1e-4",
                                                                "equilibrium.guess.b_env=95",
                                                                "equilibrium.guess.b_stor=4000",
                                                                "equilibrium.guess.c=5",
                                                                "equilibrium.guess.e=25"});
  EquilibriumResult r;
  EXPECT_EQ(cli_equilibrium(cfg, dir, &r), kOk);
  ASSERT_TRUE(r.numerical);
  const json rec = json::parse(slurp(dir / cfg.outputs.equilibrium));
  EXPECT_EQ(rec["record"], "equilibrium");
  EXPECT_NEAR(rec["numerical"]["e"].get<double>(), 24.936, 1e-3);
  EXPECT_TRUE(rec.contains("config"));

  const ScenarioConfig plain = load_config(scenario("fig1-right"), {});
  EXPECT_EQ(code_of([&] { cli_equilibrium(plain, dir); }), ErrorCode::VariantParameterMismatch);
}

TEST(Sweep, Kappa) {
  SweepSpec spec = parse_sweep_spec(read_json_file(scenario("sweep-kappa")), HANDY_SCENARIO_DIR);
  spec.checks = {"containment"};
  // kappa = 1.1 loses its Elites first; C needs more than the template horizon.
  apply_override(spec.template_config, "integration.t_end=5000");
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].value, spec.values[i]);
    EXPECT_TRUE(rows[i].error.empty()) << rows[i].error;
    EXPECT_TRUE(rows[i].t_c_collapse) << "kappa " << rows[i].value;
    EXPECT_EQ(rows[i].checks_pass, 1u);
  }
}

TEST(Sweep, MobilityAndDeterminism) {
  SweepSpec spec = parse_sweep_spec(read_json_file(scenario("sweep-mu")), HANDY_SCENARIO_DIR);
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].error.empty()) << rows[0].error;
  EXPECT_TRUE(rows[0].t_c_collapse);
  EXPECT_FALSE(rows[2].t_c_collapse);
  EXPECT_FALSE(rows[2].t_e_collapse);
  EXPECT_EQ(sweep_to_csv(spec, rows), sweep_to_csv(spec, run_sweep(spec)));
}

TEST(Sweep, BadPointRecordedInRow) {
  json j = {{"axis", "params.kappa"}, {"values", {1.5, 0.5}}, {"template", minimal()}};
  j["template"]["integration"] = {{"t_end", 10.0}};
  const auto rows = run_sweep(parse_sweep_spec(j));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].error.empty());
}

TEST(Sweep, Empty) {
  json j = {{"axis", "params.kappa"}, {"values", json::array()}, {"template", minimal()}};
  const SweepSpec spec = parse_sweep_spec(j);
  const auto rows = run_sweep(spec);
  EXPECT_TRUE(rows.empty());
  const std::string csv = sweep_to_csv(spec, rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_cli("simulate --config " + scenario("fig1-right").string() + out +
                    " --t-end 100"),
            0);
  EXPECT_TRUE(fs::exists(dir / "fig1-right.csv"));
  EXPECT_TRUE(fs::exists(dir / "fig1-right.summary.json"));
  EXPECT_EQ(run_cli("check --trajectory " + (dir / "fig1-right.csv").string() + out +
                    " --checks containment,three_birds"),
            0);

  EXPECT_EQ(run_cli("simulate --config /nonexistent.json" + out), 2);
  EXPECT_EQ(run_cli("simulate --config " + scenario("fig1-right").string() + out +
                    " --set params.kappa=0.5"),
            2);
  EXPECT_EQ(run_cli("simulate --config " + scenario("fig1-right").string() + out +
                    " --set params.gamma=1e300 --set initial.b_env=1e300 --t-end 10"),
            3);
  EXPECT_EQ(run_cli("bogus"), 2);

  std::ofstream(dir / "empty.json") << R"({"axis": "params.kappa", "values": [],
    "template": {"initial": {"b_env": 300, "b_stor": 0, "c": 1000, "e": 1}}})";
  EXPECT_EQ(run_cli("sweep --config " + (dir / "empty.json").string() + out), 0);
}

TEST(Cli, FigureData) {
  const fs::path dir = scratch("fig");
  EXPECT_EQ(run_cli("figure-data --out " + dir.string() + " --t-end 50"), 0);
  for (const auto& name : figure_scenarios()) EXPECT_TRUE(fs::exists(dir / (name + ".csv")));
  const json layout = read_json_file(dir / "figures.json");
  // Every referenced column exists in the trajectory schema; "a+b" sums columns.
  auto known = [](const std::string& expr) {
    std::stringstream ss(expr);
    std::string col;
    while (std::getline(ss, col, '+')) {
      if (std::find(kCsvColumns.begin(), kCsvColumns.end(), col) == kCsvColumns.end()) {
        return false;
      }
    }
    return true;
  };
  std::function<void(const json&)> walk = [&](const json& j) {
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        if (k == "y" && v.is_array()) {
          for (const auto& c : v) EXPECT_TRUE(known(c.get<std::string>())) << c;
        } else if (k == "x" && v.is_string()) {
          EXPECT_TRUE(known(v.get<std::string>())) << v;
        } else {
          walk(v);
        }
      }
    } else if (j.is_array()) {
      for (const auto& v : j) walk(v);
    }
  };
  walk(layout);
}
