#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "handy/equilibrium.hpp"
#include "handy/errors.hpp"
#include "handy/hypotheses.hpp"
#include "handy/integrator.hpp"

namespace handy::harness {

using nlohmann::json;

inline constexpr std::array<std::string_view, 18> kCsvColumns = {
    "t",      "b_env", "b_stor", "c", "e", "b_total", "z",       "g_z",  "g_kz",
    "v_ratio", "y_lyap", "q",    "h", "f", "db_env",  "db_stor", "dc",   "de"};

inline constexpr std::string_view kConfigPrefix = "# config: ";

/// 17 significant digits: doubles survive a text round trip exactly.
inline std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw Error(ErrorCode::InvalidConfig, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string trajectory_to_csv(const Trajectory& traj, const json& config) {
  std::string out;
  out.reserve(traj.size() * 18 * 24 + 4096);
  out += kConfigPrefix;
  out += config.dump();
  out += '\n';
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) out += ',';
    out += kCsvColumns[i];
  }
  out += '\n';
  for (const auto& s : traj.samples) {
    const double row[] = {s.t,          s.state.b_env, s.state.b_stor, s.state.c,   s.state.e,
                          s.b_total,    s.flux.z,      s.flux.g_z,     s.flux.g_kz};
    for (std::size_t i = 0; i < std::size(row); ++i) {
      if (i) out += ',';
      out += fmt17(row[i]);
    }
    out += ',';
    if (s.v_ratio) out += fmt17(*s.v_ratio);
    const double tail[] = {s.y_lyap, s.flux.q, s.flux.h, s.flux.f, s.rate.b_env,
                           s.rate.b_stor, s.rate.c, s.rate.e};
    for (double x : tail) {
      out += ',';
      out += fmt17(x);
    }
    out += '\n';
  }
  return out;
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                                 const json& config) {
  write_atomic(path, trajectory_to_csv(traj, config));
}

struct LoadedTrajectory {
  Trajectory trajectory;
  std::optional<json> config;  ///< embedded resolved config, when present
};

namespace detail {

inline double parse_double(std::string_view field, std::size_t line) {
  // strtod handles inf/nan spellings that from_chars may not on older libstdc++.
  std::string tmp(field);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    throw Error(ErrorCode::ConfigParse,
                "bad number '" + tmp + "' on line " + std::to_string(line));
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Reads a trajectory CSV. Every schema column must be present (any order);
/// missing columns raise MissingColumn.
inline LoadedTrajectory read_trajectory_csv(std::istream& in) {
  LoadedTrajectory out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::vector<std::string>> header;
  std::map<std::string, std::size_t, std::less<>> index;
  std::vector<std::size_t> col(kCsvColumns.size());

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind(kConfigPrefix, 0) == 0) {
        json j = json::parse(line.substr(kConfigPrefix.size()), nullptr, false);
        if (!j.is_discarded()) out.config = std::move(j);
      }
      continue;
    }
    const auto fields = detail::split_commas(line);
    if (!header) {
      header.emplace();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        header->emplace_back(fields[i]);
        index.emplace(std::string(fields[i]), i);
      }
      for (std::size_t k = 0; k < kCsvColumns.size(); ++k) {
        auto it = index.find(kCsvColumns[k]);
        if (it == index.end()) {
          throw Error(ErrorCode::MissingColumn,
                      "trajectory CSV lacks column '" + std::string(kCsvColumns[k]) + "'");
        }
        col[k] = it->second;
      }
      continue;
    }
    if (fields.size() != header->size()) {
      throw Error(ErrorCode::ConfigParse, "wrong field count on line " + std::to_string(lineno));
    }
    auto num = [&](std::size_t k) { return detail::parse_double(fields[col[k]], lineno); };
    Sample s;
    s.t = num(0);
    s.state = {num(1), num(2), num(3), num(4)};
    s.b_total = num(5);
    s.flux.z = num(6);
    s.flux.g_z = num(7);
    s.flux.g_kz = num(8);
    if (!fields[col[9]].empty()) s.v_ratio = num(9);
    s.y_lyap = num(10);
    s.flux.q = num(11);
    s.flux.h = num(12);
    s.flux.f = num(13);
    s.rate = {num(14), num(15), num(16), num(17)};
    out.trajectory.samples.push_back(s);
  }
  if (!header) throw Error(ErrorCode::MissingColumn, "trajectory CSV has no header");
  auto& tr = out.trajectory;
  if (!tr.samples.empty()) {
    tr.t0 = tr.samples.front().t;
    if (tr.samples.size() > 1) tr.dt_sample = tr.samples[1].t - tr.samples[0].t;
  }
  return out;
}

inline LoadedTrajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigParse, "cannot read '" + path.string() + "'");
  return read_trajectory_csv(in);
}

inline json optional_number(const std::optional<double>& x) {
  return x ? json(*x) : json(nullptr);
}

inline json state_json(const State4& s) {
  return {{"b_env", s.b_env}, {"b_stor", s.b_stor}, {"c", s.c}, {"e", s.e}};
}

inline json to_json(const CollapseEvent& ev) {
  return {{"t_c_below", optional_number(ev.t_c_below)},
          {"t_e_below", optional_number(ev.t_e_below)},
          {"interpolated", ev.interpolated}};
}

inline json to_json(const CheckResult& r) {
  json j = {{"record", "check"},
            {"name", r.name},
            {"pass", r.pass},
            {"vacuous", r.vacuous},
            {"worst_violation", r.worst_violation},
            {"tolerance", r.tolerance},
            {"witness_time", nullptr},
            {"witness_state", nullptr},
            {"detail", r.detail},
            {"error", nullptr}};
  if (r.witness) {
    j["witness_time"] = r.witness->t;
    j["witness_state"] = state_json(r.witness->state);
  }
  if (r.error) j["error"] = std::string(to_string(*r.error));
  return j;
}

inline json to_json(const EquilibriumResult& r) {
  auto opt_state = [](const std::optional<State4>& s) {
    return s ? state_json(*s) : json(nullptr);
  };
  return {{"record", "equilibrium"},
          {"closed_form", opt_state(r.closed_form)},
          {"numerical", opt_state(r.numerical)},
          {"residual_closed", optional_number(r.residual_closed)},
          {"residual_numerical", optional_number(r.residual_numerical)},
          {"closed_branch_valid", r.closed_branch_valid},
          {"numerical_branch_valid", r.numerical_branch_valid},
          {"discrepancy", optional_number(r.discrepancy)},
          {"closed_form_error", r.closed_form_error},
          {"numerical_error", r.numerical_error}};
}

/// JSON Lines: a config record, then one record per check.
inline std::string report_to_jsonl(const HypothesisReport& report, const json& config) {
  std::string out = json{{"record", "config"}, {"config", config}}.dump() + "\n";
  for (const auto& r : report) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace handy::harness
