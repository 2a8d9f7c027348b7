#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "handy/errors.hpp"
#include "handy/model.hpp"
#include "handy/params.hpp"

namespace handy {

/// One classical Runge-Kutta step for y' = f(t, y). State needs +, and
/// double * State.
template <typename State, typename System>
State rk4_step(const System& f, double t, const State& y, double dt) {
  const double half = 0.5 * dt;
  const State k1 = f(t, y);
  const State k2 = f(t + half, y + half * k1);
  const State k3 = f(t + half, y + half * k2);
  const State k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline double distance(double a, double b) { return std::abs(a - b); }
inline double distance(const State4& a, const State4& b) { return max_norm(a - b); }

/// Fixed-step RK4 from t0 to t0 + steps * dt; returns the final state.
template <typename State, typename System>
State rk4_solve(const System& f, State y, double t0, double dt, std::int64_t steps) {
  for (std::int64_t i = 0; i < steps; ++i) {
    y = rk4_step(f, t0 + static_cast<double>(i) * dt, y, dt);
  }
  return y;
}

/// Richardson-style order estimate from runs at dt, dt/2, dt/4:
/// log2(|y_dt - y_dt/2| / |y_dt/2 - y_dt/4|).
struct OrderEstimate {
  double order{};
  double error_coarse{};  ///< |y_dt - y_dt/2|
  double error_fine{};    ///< |y_dt/2 - y_dt/4|
};

template <typename State, typename System>
OrderEstimate observed_order(const System& f, const State& y0, double t0, double t_end, double dt) {
  const auto steps = static_cast<std::int64_t>(std::llround((t_end - t0) / dt));
  const State a = rk4_solve(f, y0, t0, dt, steps);
  const State b = rk4_solve(f, y0, t0, dt / 2, 2 * steps);
  const State c = rk4_solve(f, y0, t0, dt / 4, 4 * steps);
  OrderEstimate out;
  out.error_coarse = distance(a, b);
  out.error_fine = distance(b, c);
  out.order = std::log2(out.error_coarse / out.error_fine);
  return out;
}

struct IntegrationConfig {
  double dt{0.1};
  double t_end{1000.0};
  std::size_t sample_stride{1};
  double positivity_floor{1e-300};
  /// Unset means 1e-6 * C(0).
  std::optional<double> collapse_threshold;

  double threshold_for(const State4& initial) const {
    return collapse_threshold.value_or(1e-6 * initial.c);
  }

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidConfig, "dt must be > 0");
    if (!(t_end >= dt) || !std::isfinite(t_end)) {
      throw Error(ErrorCode::InvalidConfig, "t_end must be >= dt");
    }
    if (sample_stride < 1) throw Error(ErrorCode::InvalidConfig, "sample_stride must be >= 1");
    if (!(positivity_floor >= 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "positivity_floor must be >= 0");
    }
    if (collapse_threshold && !(*collapse_threshold > 0.0)) {
      throw Error(ErrorCode::InvalidConfig, "collapse_threshold must be > 0");
    }
  }
};

/// A sampled point with everything the checks and the CSV need.
struct Sample {
  double t{};
  State4 state;
  FluxBreakdown flux;
  State4 rate;                    ///< analytic rhs at (state, t)
  double b_total{};
  std::optional<double> v_ratio;  ///< c / e, present when e > 0
  double y_lyap{};
};

struct Trajectory {
  double t0{};
  double dt_sample{};
  std::vector<Sample> samples;
  std::size_t clamp_count{};

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  const Sample& front() const { return samples.front(); }
  const Sample& back() const { return samples.back(); }
};

/// Builds a sample at (t, s) by evaluating the model analytically.
inline Sample make_sample(double t, const State4& s, const ParameterSet& p, Variant variant) {
  Sample out;
  out.t = t;
  out.state = s;
  out.flux = detail::fluxes_at(s, p);
  out.rate = detail::rhs_at(s, p, variant, out.flux);
  out.b_total = s.b_total();
  if (s.e > 0.0) out.v_ratio = s.c / s.e;
  out.y_lyap = lyapunov_y(s, p.sigma, p.xi1, p.xi2);
  return out;
}

inline Sample make_sample(double t, const State4& s, const Parameters& p, Variant variant) {
  return make_sample(t, s, p.at(t), variant);
}

namespace detail {

// Applies the positivity floor in place. Exact zeros are left alone: the
// zero-population faces are invariant. Returns the number of clamped entries.
inline std::size_t clamp_to_floor(State4& s, double floor) {
  std::size_t n = 0;
  for (double* x : {&s.b_env, &s.b_stor, &s.c, &s.e}) {
    if (*x < floor && *x != 0.0) {
      *x = floor;
      ++n;
    }
  }
  return n;
}

}  // namespace detail

/// Fixed-step RK4 integration of the chosen variant, sampled every
/// sample_stride steps starting at t = 0. Bit-for-bit deterministic.
inline Trajectory integrate(const State4& initial, const Parameters& p, Variant variant,
                            const IntegrationConfig& cfg) {
  cfg.validate();
  require_variant_fits(p, variant);
  if (!initial.finite() || !initial.non_negative()) {
    throw Error(ErrorCode::InvalidConfig, "initial state must be finite and non-negative");
  }

  const auto steps = static_cast<std::int64_t>(std::llround(cfg.t_end / cfg.dt));
  const auto stride = static_cast<std::int64_t>(cfg.sample_stride);
  const double dt = cfg.dt;

  Trajectory traj;
  traj.t0 = 0.0;
  traj.dt_sample = dt * static_cast<double>(stride);
  traj.samples.reserve(static_cast<std::size_t>(steps / stride + 1));
  traj.samples.push_back(make_sample(0.0, initial, p, variant));

  auto system = [&p, variant](double t, const State4& s) {
    return detail::rhs_at(s, p.at(t), variant);
  };

  State4 y = initial;
  double last_good = 0.0;
  for (std::int64_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * dt;
    State4 next;
    try {
      next = rk4_step(system, t, y, dt);
    } catch (const Error& e) {
      // A stage left the state space (NaN or negative supply): same breakdown.
      if (e.code() != ErrorCode::NegativeZ) throw;
      throw NonFiniteStateError(last_good, "integration broke down after t = " +
                                               std::to_string(last_good) + ": " + e.what());
    }
    if (!next.finite()) {
      throw NonFiniteStateError(last_good, "non-finite state after t = " + std::to_string(last_good));
    }
    traj.clamp_count += detail::clamp_to_floor(next, cfg.positivity_floor);
    y = next;
    const double t_next = static_cast<double>(i + 1) * dt;
    last_good = t_next;
    if ((i + 1) % stride == 0) traj.samples.push_back(make_sample(t_next, y, p, variant));
  }
  return traj;
}

/// Observed order of the model integration over [0, cfg.t_end] from runs at
/// cfg.dt, dt/2 and dt/4. Throws KinkCrossedDuringSegment if z or kappa*z
/// changes side of 1 in any of the runs.
inline OrderEstimate convergence_check(const State4& initial, const Parameters& p,
                                       Variant variant, const IntegrationConfig& cfg) {
  cfg.validate();
  require_variant_fits(p, variant);
  const auto steps = static_cast<std::int64_t>(std::llround(cfg.t_end / cfg.dt));

  auto side = [](double x) { return x < 1.0; };
  auto sides_at = [&](double t, const State4& s) {
    const ParameterSet q = p.at(t);
    const FluxBreakdown fx = detail::fluxes_at(s, q);
    return std::pair{side(fx.z), side(q.kappa * fx.z)};
  };
  const auto start_sides = sides_at(0.0, initial);

  auto system = [&p, variant](double t, const State4& s) {
    return detail::rhs_at(s, p.at(t), variant);
  };
  auto run = [&](double dt, std::int64_t n) {
    State4 y = initial;
    for (std::int64_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * dt;
      y = rk4_step(system, t, y, dt);
      if (sides_at(t + dt, y) != start_sides) {
        throw Error(ErrorCode::KinkCrossedDuringSegment,
                    "z or kappa*z crossed 1 near t = " + std::to_string(t + dt));
      }
    }
    return y;
  };

  const State4 a = run(cfg.dt, steps);
  const State4 b = run(cfg.dt / 2, 2 * steps);
  const State4 c = run(cfg.dt / 4, 4 * steps);
  OrderEstimate out;
  out.error_coarse = distance(a, b);
  out.error_fine = distance(b, c);
  out.order = std::log2(out.error_coarse / out.error_fine);
  return out;
}

struct CollapseEvent {
  std::optional<double> t_c_below;
  std::optional<double> t_e_below;
  bool interpolated{false};

  bool both() const { return t_c_below.has_value() && t_e_below.has_value(); }
  bool any() const { return t_c_below.has_value() || t_e_below.has_value(); }
};

/// First time c (and, independently, e) drops below threshold, linearly
/// interpolated between the bracketing samples.
inline CollapseEvent detect_collapse(const Trajectory& traj, double threshold) {
  CollapseEvent ev;
  auto scan = [&](auto get) -> std::optional<double> {
    const auto& s = traj.samples;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double x = get(s[i].state);
      if (x < threshold) {
        if (i == 0) return s[0].t;
        const double x0 = get(s[i - 1].state);
        ev.interpolated = true;
        return s[i - 1].t + (s[i].t - s[i - 1].t) * (x0 - threshold) / (x0 - x);
      }
    }
    return std::nullopt;
  };
  ev.t_c_below = scan([](const State4& s) { return s.c; });
  ev.t_e_below = scan([](const State4& s) { return s.e; });
  return ev;
}

}  // namespace handy
