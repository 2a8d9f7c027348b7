#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "handy/errors.hpp"
#include "handy/integrator.hpp"
#include "handy/model.hpp"
#include "handy/params.hpp"

namespace handy {

/// Box [0, b4] x [0, c5] x [0, c5] in (B, C, E) that trajectories cannot leave.
struct TrappingRegion {
  double b4{};
  double c5{};
};

/// b4 = max{sup gamma*lambda^2/epsilon, 4 sup lambda, B(0)};
/// c5 = max{(1 + margin) sup kappa * b4 / (zeta inf rho), C(0), E(0)}.
/// The margin turns the strict lower bound on c5 into a checkable one.
inline TrappingRegion build_trapping_region(const Parameters& p, const State4& initial,
                                            double margin = 0.05) {
  const auto& b = p.bounds();
  // Exact for constants; an upper bound of the true sup for schedules.
  const double food_cap = b.gamma.sup * b.lambda.sup * b.lambda.sup / b.epsilon.inf;
  TrappingRegion r;
  r.b4 = std::max({food_cap, 4.0 * b.lambda.sup, initial.b_total()});
  r.c5 = std::max({(1.0 + margin) * b.kappa.sup * r.b4 / (p.zeta() * b.rho.inf), initial.c,
                   initial.e});
  return r;
}

struct Witness {
  double t{};
  State4 state;
};

/// Outcome of one hypothesis check. pass <=> worst_violation <= tolerance.
/// A vacuous check had no sample in its quantifier domain.
struct CheckResult {
  std::string name;
  bool pass{true};
  bool vacuous{false};
  double worst_violation{0.0};
  std::optional<Witness> witness;
  double tolerance{0.0};
  std::string detail;
  std::optional<ErrorCode> error;  ///< set when the check's precondition failed
};

using HypothesisReport = std::vector<CheckResult>;

inline constexpr std::array<std::string_view, 7> kCheckNames = {
    "containment", "rate_ordering", "rate_gap",      "lyapunov_ratio",
    "contraction", "three_birds",   "gronwall_decay"};

inline bool is_check_name(std::string_view name) {
  return std::find(kCheckNames.begin(), kCheckNames.end(), name) != kCheckNames.end();
}

/// Tunables for the checks. Unset values take the documented defaults.
struct CheckOptions {
  /// Band half-width for the rate-gap and contraction triggers. Default: the
  /// rate-gap epsilon (inf (kappa-1)/(kappa+2)) * (-xi1).
  std::optional<double> delta2;
  /// Required unit-time contraction of C/E is 1/(1 + epsilon2_factor * delta2).
  double epsilon2_factor{0.1};
  double region_margin{0.05};
};

namespace detail {

// Tracks the worst violation and its witness across samples.
class WorstTracker {
 public:
  void offer(double violation, const Sample& s) {
    if (!seen_ || violation > worst_) {
      worst_ = violation;
      witness_ = Witness{s.t, s.state};
      seen_ = true;
    }
  }
  bool seen() const { return seen_; }

  CheckResult finish(std::string name, double tolerance) const {
    CheckResult r;
    r.name = std::move(name);
    r.tolerance = tolerance;
    if (!seen_) {
      r.vacuous = true;
      r.pass = true;
      return r;
    }
    r.worst_violation = worst_;
    r.witness = witness_;
    r.pass = worst_ <= tolerance;
    return r;
  }

 private:
  bool seen_{false};
  double worst_{0.0};
  Witness witness_;
};

inline void require_positive_populations(const Trajectory& traj, bool need_c) {
  for (const auto& s : traj.samples) {
    if (!(s.state.e > 0.0) || (need_c && !(s.state.c > 0.0))) {
      throw Error(ErrorCode::PopulationZeroAtSample,
                  "population is zero at t = " + std::to_string(s.t));
    }
  }
}

inline double v_of(const Sample& s) {
  if (!s.v_ratio) {
    throw Error(ErrorCode::PopulationZeroAtSample, "v ratio missing at t = " + std::to_string(s.t));
  }
  return *s.v_ratio;
}

}  // namespace detail

/// Every sample inside the box: b_env + b_stor <= b4, c <= c5, e <= c5.
inline CheckResult check_containment(const Trajectory& traj, const TrappingRegion& region) {
  detail::WorstTracker w;
  for (const auto& s : traj.samples) {
    const double v = std::max({s.state.b_total() - region.b4, s.state.c - region.c5,
                               s.state.e - region.c5});
    w.offer(v, s);
  }
  auto r = w.finish("containment", 0.0);
  r.detail = "b4=" + std::to_string(region.b4) + " c5=" + std::to_string(region.c5);
  return r;
}

/// Elite rate never below the Commoner rate: g_kz - g_z >= -1e-12.
inline CheckResult check_rate_ordering(const Trajectory& traj) {
  detail::require_positive_populations(traj, true);
  detail::WorstTracker w;
  for (const auto& s : traj.samples) w.offer(s.flux.g_z - s.flux.g_kz, s);
  return w.finish("rate_ordering", 1e-12);
}

/// Wherever |g_z| <= delta2 the Elite rate leads by more than the rate-gap
/// epsilon: g_kz - g_z > eps2* - 1e-12.
inline CheckResult check_rate_gap(const Trajectory& traj, const Parameters& p,
                                  const CheckOptions& opt = {}) {
  detail::require_positive_populations(traj, true);
  const double eps2 = p.rate_gap_epsilon();
  const double delta2 = opt.delta2.value_or(eps2);
  detail::WorstTracker w;
  std::size_t band = 0;
  for (const auto& s : traj.samples) {
    if (std::abs(s.flux.g_z) <= delta2) {
      ++band;
      w.offer(eps2 - (s.flux.g_kz - s.flux.g_z), s);
    }
  }
  auto r = w.finish("rate_gap", 1e-12);
  std::ostringstream os;
  os.precision(10);
  os << "eps2*=" << eps2 << " delta2*=" << delta2 << " band_samples=" << band;
  r.detail = os.str();
  return r;
}

/// V = C/E non-increasing between consecutive samples (relative 1e-9) and its
/// analytic per-capita derivative dc/c - de/e non-positive at every sample.
inline CheckResult check_lyapunov_ratio(const Trajectory& traj) {
  detail::require_positive_populations(traj, false);
  constexpr double tol = 1e-9;
  detail::WorstTracker w;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.samples[i];
    const double v = detail::v_of(s);
    if (s.state.c > 0.0) w.offer(s.rate.c / s.state.c - s.rate.e / s.state.e, s);
    if (i > 0) {
      const double v_prev = detail::v_of(traj.samples[i - 1]);
      w.offer((v - v_prev) / v_prev, s);
    }
  }
  return w.finish("lyapunov_ratio", tol);
}

/// Whenever |c'/c| <= delta2 at t, v(t + 1) < v(t) / (1 + eps2) (relative
/// tolerance 1e-9), with v(t + 1) interpolated linearly between samples.
inline CheckResult check_contraction(const Trajectory& traj, const Parameters& p,
                                     const CheckOptions& opt = {}) {
  detail::require_positive_populations(traj, false);
  if (traj.size() < 2 || !(traj.dt_sample <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "contraction check needs dt_sample <= 1");
  }
  const double delta2 = opt.delta2.value_or(p.rate_gap_epsilon());
  const double eps2 = opt.epsilon2_factor * delta2;
  const double t_last = traj.back().t;
  constexpr double tol = 1e-9;

  detail::WorstTracker w;
  double worst_factor = 0.0;
  std::size_t triggers = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.samples[i];
    if (!(s.state.c > 0.0) || !(std::abs(s.rate.c / s.state.c) <= delta2)) continue;
    ++triggers;
    const double target = s.t + 1.0;
    if (target > t_last + 1e-9 * traj.dt_sample) {
      throw Error(ErrorCode::HorizonTooShort,
                  "trigger at t = " + std::to_string(s.t) + " needs data up to t + 1");
    }
    // Samples are uniform; locate the bracket for t + 1.
    const double pos = (target - traj.t0) / traj.dt_sample;
    auto j = static_cast<std::size_t>(std::floor(pos));
    j = std::min(j, traj.size() - 2);
    const double frac = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
    const double v0 = detail::v_of(traj.samples[j]);
    const double v1 = detail::v_of(traj.samples[j + 1]);
    const double v_ahead = v0 + frac * (v1 - v0);
    const double v_now = detail::v_of(s);
    worst_factor = std::max(worst_factor, v_ahead / v_now);
    w.offer((v_ahead - v_now / (1.0 + eps2)) / v_now, s);
  }
  auto r = w.finish("contraction", tol);
  std::ostringstream os;
  os.precision(10);
  os << "delta2=" << delta2 << " eps2=" << eps2 << " triggers=" << triggers
     << " max_unit_time_factor=" << worst_factor;
  r.detail = os.str();
  return r;
}

/// Y' <= h - eps_hat * Y at every sample, with Y' from the analytic rhs.
/// Violation is relative to the magnitude of the terms involved; tol 1e-12.
inline CheckResult check_three_birds(const Trajectory& traj, const Parameters& p) {
  const double k = p.sigma() / (p.xi2() - p.xi1());
  const double eps_hat = p.epsilon_hat();
  detail::WorstTracker w;
  for (const auto& s : traj.samples) {
    const double y_dot = k * (s.rate.c + s.rate.e) + s.rate.b_stor;
    const double bound = s.flux.h - eps_hat * s.y_lyap;
    double scale = std::abs(s.flux.h) + eps_hat * std::abs(s.y_lyap) +
                   k * (std::abs(s.rate.c) + std::abs(s.rate.e)) + std::abs(s.rate.b_stor);
    if (scale == 0.0) scale = 1.0;
    w.offer((y_dot - bound) / scale, s);
  }
  return w.finish("three_birds", 1e-12);
}

/// Integral form of Y' <= h - eps_hat Y over every sample pair s < t:
///   Y(t) <= Y(s) exp(-eps_hat (t - s)) + int_s^t exp(-eps_hat (t - u)) h(u) du,
/// the integral by the trapezoid rule on samples. All pairs are covered by
/// carrying the tightest right-hand side forward, so the scan is linear.
/// Tolerance: 1e-12 of max Y plus the summed trapezoid error terms
/// dt^3 / 12 * |f''| over all intervals, with f(u) = exp(-eps_hat (t - u)) h(u)
/// and |f''| <= |h''| + 2 eps_hat |h'| + eps_hat^2 |h| taken at the larger of
/// the interval's two endpoints (finite differences on samples).
inline CheckResult check_gronwall_decay(const Trajectory& traj, const Parameters& p) {
  const double eps_hat = p.epsilon_hat();
  const auto& s = traj.samples;
  const std::size_t n = s.size();

  double y_max = 0.0;
  for (const auto& x : s) y_max = std::max(y_max, std::abs(x.y_lyap));
  std::vector<double> curvature(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dt_l = s[i].t - s[i - 1].t;
    const double dt_r = s[i + 1].t - s[i].t;
    const double h2 = 2.0 * ((s[i + 1].flux.h - s[i].flux.h) / dt_r -
                             (s[i].flux.h - s[i - 1].flux.h) / dt_l) / (dt_l + dt_r);
    const double h1 = (s[i + 1].flux.h - s[i - 1].flux.h) / (dt_l + dt_r);
    curvature[i] = std::abs(h2) + 2.0 * eps_hat * std::abs(h1) +
                   eps_hat * eps_hat * std::abs(s[i].flux.h);
  }
  if (n >= 3) {
    curvature[0] = curvature[1];
    curvature[n - 1] = curvature[n - 2];
  }
  double quadrature = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double step = s[i].t - s[i - 1].t;
    quadrature += step * step * step / 12.0 * std::max(curvature[i - 1], curvature[i]);
  }
  const double tol = 1e-12 * std::max(y_max, 1.0) + quadrature;

  detail::WorstTracker w;
  double best = std::numeric_limits<double>::infinity();  // min over s < t of the bound
  for (std::size_t i = 1; i < n; ++i) {
    const double step = s[i].t - s[i - 1].t;
    const double decay = std::exp(-eps_hat * step);
    best = std::min(best, s[i - 1].y_lyap) * decay +
           0.5 * step * (decay * s[i - 1].flux.h + s[i].flux.h);
    w.offer(s[i].y_lyap - best, s[i]);
  }
  auto r = w.finish("gronwall_decay", tol);
  std::ostringstream os;
  os.precision(10);
  os << "eps_hat=" << eps_hat << " quadrature_tol=" << tol;
  r.detail = os.str();
  return r;
}

/// Runs the named checks, turning precondition failures into error records.
/// The trapping region is built from the first sample.
inline HypothesisReport run_checks(const Trajectory& traj, const Parameters& p,
                                   const std::vector<std::string>& names,
                                   const CheckOptions& opt = {}) {
  HypothesisReport out;
  for (const auto& name : names) {
    try {
      if (name == "containment") {
        const auto region = build_trapping_region(p, traj.front().state, opt.region_margin);
        out.push_back(check_containment(traj, region));
      } else if (name == "rate_ordering") {
        out.push_back(check_rate_ordering(traj));
      } else if (name == "rate_gap") {
        out.push_back(check_rate_gap(traj, p, opt));
      } else if (name == "lyapunov_ratio") {
        out.push_back(check_lyapunov_ratio(traj));
      } else if (name == "contraction") {
        out.push_back(check_contraction(traj, p, opt));
      } else if (name == "three_birds") {
        out.push_back(check_three_birds(traj, p));
      } else if (name == "gronwall_decay") {
        out.push_back(check_gronwall_decay(traj, p));
      } else {
        throw Error(ErrorCode::ConfigParse, "unknown check '" + name + "'");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigParse) throw;
      CheckResult r;
      r.name = name;
      r.pass = false;
      r.error = e.code();
      r.detail = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

inline std::vector<std::string> all_check_names() {
  return {kCheckNames.begin(), kCheckNames.end()};
}

}  // namespace handy
