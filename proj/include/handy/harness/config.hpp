#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "handy/errors.hpp"
#include "handy/hypotheses.hpp"
#include "handy/integrator.hpp"
#include "handy/model.hpp"
#include "handy/params.hpp"

namespace handy::harness {

using nlohmann::json;

/// One runnable scenario: model, initial state, integration settings, checks
/// and output file names.
struct ScenarioConfig {
  std::string name{"scenario"};
  Variant variant{Variant::handy};
  std::variant<ParameterSet, ParameterSchedule> params{ParameterSet::typical()};
  State4 initial;
  IntegrationConfig integration;
  std::vector<std::string> checks;
  struct Outputs {
    std::string trajectory{"trajectory.csv"};
    std::string summary{"summary.json"};
    std::string report{"report.jsonl"};
    std::string equilibrium{"equilibrium.json"};
  } outputs;
  State4 equilibrium_guess{50.0, 1000.0, 50.0, 10.0};
  std::string notes;

  Parameters validated() const {
    return std::visit([](const auto& p) { return validate_params(p); }, params);
  }
  double threshold() const { return integration.threshold_for(initial); }
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& msg) {
  throw Error(ErrorCode::ConfigParse, msg);
}

inline double number_at(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) parse_fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

inline TimeFunction parse_time_function(const json& j, const std::string& field) {
  if (j.is_number()) return TimeFunction(j.get<double>());
  if (!j.is_object() || !j.contains("type")) {
    parse_fail("'" + field + "' must be a number or a function object with a 'type'");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") return TimeFunction(number_at(j, "value", 0.0));
  if (type == "sinusoid") {
    return TimeFunction(TimeFunction::Sinusoid{number_at(j, "c", 0.0), number_at(j, "a", 0.0),
                                               number_at(j, "omega", 0.0),
                                               number_at(j, "phi", 0.0)});
  }
  if (type == "piecewise_linear") {
    TimeFunction::PiecewiseLinear pl;
    if (!j.contains("knots") || !j.at("knots").is_array()) {
      parse_fail("'" + field + "' piecewise_linear needs a 'knots' array");
    }
    for (const auto& k : j.at("knots")) {
      if (!k.is_array() || k.size() != 2) parse_fail("knots must be [t, value] pairs");
      pl.knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
    }
    return TimeFunction(std::move(pl));
  }
  parse_fail("'" + field + "' has unknown function type '" + type + "'");
}

inline json time_function_to_json(const TimeFunction& f) {
  return std::visit(
      [](const auto& v) -> json {
        using F = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<F, TimeFunction::Constant>) {
          return v.value;
        } else if constexpr (std::is_same_v<F, TimeFunction::Sinusoid>) {
          return {{"type", "sinusoid"}, {"c", v.c}, {"a", v.a}, {"omega", v.omega}, {"phi", v.phi}};
        } else {
          json knots = json::array();
          for (const auto& [t, x] : v.knots) knots.push_back({t, x});
          return {{"type", "piecewise_linear"}, {"knots", knots}};
        }
      },
      f.variant());
}

inline State4 parse_state(const json& j, const std::string& what) {
  if (!j.is_object()) parse_fail("'" + what + "' must be an object");
  for (const char* k : {"b_env", "b_stor", "c", "e"}) {
    if (!j.contains(k)) parse_fail("'" + what + "' is missing '" + k + "'");
  }
  return {number_at(j, "b_env", 0), number_at(j, "b_stor", 0), number_at(j, "c", 0),
          number_at(j, "e", 0)};
}

inline json state_to_json(const State4& s) {
  return {{"b_env", s.b_env}, {"b_stor", s.b_stor}, {"c", s.c}, {"e", s.e}};
}

inline double rho_from(const json& j, double fallback) {
  if (j.contains("rho") && j.contains("rho_inv")) parse_fail("give either 'rho' or 'rho_inv'");
  if (j.contains("rho_inv")) {
    const double inv = number_at(j, "rho_inv", 0.0);
    return 1.0 / inv;
  }
  return number_at(j, "rho", fallback);
}

}  // namespace detail

/// Parses a config object. Missing parameters default to the shipped values;
/// the initial state is required.
inline ScenarioConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) parse_fail("config must be a JSON object");
  ScenarioConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    cfg.variant = parse_variant(j.value("variant", std::string("handy")));
    cfg.notes = j.value("notes", std::string());

    const json params = j.value("params", json::object());
    if (!params.is_object()) parse_fail("'params' must be an object");
    static const char* const known[] = {"nu",    "lambda", "gamma", "epsilon", "sigma", "rho",
                                        "rho_inv", "kappa", "xi1",  "xi2",     "mu"};
    for (const auto& [key, _] : params.items()) {
      if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
        parse_fail("unknown parameter '" + key + "'");
      }
    }
    const ParameterSet d = ParameterSet::typical();
    bool any_function = false;
    for (const char* k : {"lambda", "gamma", "epsilon", "rho", "nu", "kappa"}) {
      if (params.contains(k) && params.at(k).is_object()) any_function = true;
    }
    if (cfg.variant == Variant::handy_star || any_function) {
      ParameterSchedule s;
      auto fn = [&](const char* k, double fallback) {
        return params.contains(k) ? parse_time_function(params.at(k), k) : TimeFunction(fallback);
      };
      s.lambda = fn("lambda", d.lambda);
      s.gamma = fn("gamma", d.gamma);
      s.epsilon = fn("epsilon", d.epsilon);
      s.nu = fn("nu", d.nu);
      s.kappa = fn("kappa", d.kappa);
      if (params.contains("rho_inv")) {
        if (params.contains("rho")) parse_fail("give either 'rho' or 'rho_inv'");
        s.rho = TimeFunction(1.0 / number_at(params, "rho_inv", 0.0));
      } else {
        s.rho = fn("rho", d.rho);
      }
      s.sigma = number_at(params, "sigma", d.sigma);
      s.xi1 = number_at(params, "xi1", d.xi1);
      s.xi2 = number_at(params, "xi2", d.xi2);
      cfg.params = s;
    } else {
      ParameterSet p;
      p.nu = number_at(params, "nu", d.nu);
      p.lambda = number_at(params, "lambda", d.lambda);
      p.gamma = number_at(params, "gamma", d.gamma);
      p.epsilon = number_at(params, "epsilon", d.epsilon);
      p.sigma = number_at(params, "sigma", d.sigma);
      p.rho = rho_from(params, d.rho);
      p.kappa = number_at(params, "kappa", d.kappa);
      p.xi1 = number_at(params, "xi1", d.xi1);
      p.xi2 = number_at(params, "xi2", d.xi2);
      p.mu = number_at(params, "mu", d.mu);
      cfg.params = p;
    }

    if (!j.contains("initial")) parse_fail("'initial' state is required");
    cfg.initial = parse_state(j.at("initial"), "initial");

    const json integ = j.value("integration", json::object());
    cfg.integration.dt = number_at(integ, "dt", cfg.integration.dt);
    cfg.integration.t_end = number_at(integ, "t_end", cfg.integration.t_end);
    if (integ.contains("sample_stride")) {
      const auto& st = integ.at("sample_stride");
      if (!st.is_number_integer() || st.get<long long>() < 1) {
        parse_fail("'sample_stride' must be a positive integer");
      }
      cfg.integration.sample_stride = st.get<std::size_t>();
    }
    cfg.integration.positivity_floor =
        number_at(integ, "positivity_floor", cfg.integration.positivity_floor);
    if (integ.contains("collapse_threshold") && !integ.at("collapse_threshold").is_null()) {
      cfg.integration.collapse_threshold = number_at(integ, "collapse_threshold", 0.0);
    }

    if (j.contains("checks")) {
      for (const auto& c : j.at("checks")) {
        const std::string name = c.get<std::string>();
        if (!is_check_name(name)) parse_fail("unknown check '" + name + "'");
        cfg.checks.push_back(name);
      }
    }
    const json out = j.value("outputs", json::object());
    cfg.outputs.trajectory = out.value("trajectory", cfg.outputs.trajectory);
    cfg.outputs.summary = out.value("summary", cfg.outputs.summary);
    cfg.outputs.report = out.value("report", cfg.outputs.report);
    cfg.outputs.equilibrium = out.value("equilibrium", cfg.outputs.equilibrium);
    if (j.contains("equilibrium") && j.at("equilibrium").contains("guess")) {
      cfg.equilibrium_guess = parse_state(j.at("equilibrium").at("guess"), "equilibrium.guess");
    }
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
  return cfg;
}

/// Fully resolved config: every default written out, rho echoed as rho_inv
/// for constant parameters, the collapse threshold materialised.
inline json to_json(const ScenarioConfig& cfg) {
  using namespace detail;
  json params;
  if (const auto* p = std::get_if<ParameterSet>(&cfg.params)) {
    params = {{"nu", p->nu},       {"lambda", p->lambda}, {"gamma", p->gamma},
              {"epsilon", p->epsilon}, {"sigma", p->sigma}, {"rho_inv", p->rho_inv()},
              {"kappa", p->kappa}, {"xi1", p->xi1},       {"xi2", p->xi2},
              {"mu", p->mu}};
  } else {
    const auto& s = std::get<ParameterSchedule>(cfg.params);
    params = {{"lambda", time_function_to_json(s.lambda)},
              {"gamma", time_function_to_json(s.gamma)},
              {"epsilon", time_function_to_json(s.epsilon)},
              {"rho", time_function_to_json(s.rho)},
              {"nu", time_function_to_json(s.nu)},
              {"kappa", time_function_to_json(s.kappa)},
              {"sigma", s.sigma},
              {"xi1", s.xi1},
              {"xi2", s.xi2}};
  }
  json out = {
      {"name", cfg.name},
      {"variant", std::string(to_string(cfg.variant))},
      {"params", params},
      {"initial", state_to_json(cfg.initial)},
      {"integration",
       {{"dt", cfg.integration.dt},
        {"t_end", cfg.integration.t_end},
        {"sample_stride", cfg.integration.sample_stride},
        {"positivity_floor", cfg.integration.positivity_floor},
        {"collapse_threshold", cfg.threshold()}}},
      {"checks", cfg.checks},
      {"outputs",
       {{"trajectory", cfg.outputs.trajectory},
        {"summary", cfg.outputs.summary},
        {"report", cfg.outputs.report},
        {"equilibrium", cfg.outputs.equilibrium}}},
      {"equilibrium", {{"guess", state_to_json(cfg.equilibrium_guess)}}},
  };
  if (!cfg.notes.empty()) out["notes"] = cfg.notes;
  return out;
}

/// Applies "dotted.path=value". The value is read as JSON when it parses,
/// otherwise as a string.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::ConfigParse, "override '" + assignment + "' is not path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &j;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw Error(ErrorCode::ConfigParse, "empty segment in '" + path + "'");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw Error(ErrorCode::ConfigParse, "'" + path + "' crosses a value");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw Error(ErrorCode::ConfigParse, "'" + path + "' crosses a value");
  // rho and rho_inv are alternatives; an override of one replaces the other.
  if (keys.size() == 2 && keys[0] == "params") {
    if (keys[1] == "rho") node->erase("rho_inv");
    if (keys[1] == "rho_inv") node->erase("rho");
  }
  (*node)[keys.back()] = value;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigParse, "cannot read '" + path.string() + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ConfigParse, "'" + path.string() + "' is not JSON");
  return j;
}

inline ScenarioConfig load_config(const std::filesystem::path& path,
                                  const std::vector<std::string>& overrides = {}) {
  json j = read_json_file(path);
  for (const auto& o : overrides) apply_override(j, o);
  return parse_config(j);
}

}  // namespace handy::harness
