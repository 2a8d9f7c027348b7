#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "handy/errors.hpp"
#include "handy/integrator.hpp"
#include "handy/model.hpp"
#include "handy/params.hpp"

namespace handy {

namespace detail {

inline const ParameterSet& mobility_params(const Parameters& p) {
  if (p.time_varying()) {
    throw Error(ErrorCode::VariantParameterMismatch, "equilibria need constant parameters");
  }
  if (!(p.mu() > 0.0)) {
    throw Error(ErrorCode::MobilityZero, "no interior equilibrium without mobility (mu = 0)");
  }
  return p.base();
}

// Mobility rhs that accepts any finite state, including the negative
// candidates a closed form may produce. Same formulas as rhs_at otherwise.
inline State4 mobility_rhs_any(const State4& s, const ParameterSet& p) {
  const double demand = s.c + p.kappa * s.e;
  double z = 0.0;
  double clamped = 0.0;
  if (demand != 0.0) {
    z = (s.b_stor / p.rho) / demand;
    clamped = std::min(1.0, z);
  } else {
    clamped = s.b_stor > 0.0 ? 1.0 : 0.0;
    z = clamped;
  }
  const double span = p.xi2 - p.xi1;
  const double g_z = p.xi1 + span * clamped;
  const double g_kz = p.xi1 + span * std::min(1.0, p.kappa * z);
  const double q = p.gamma * s.b_env * (1.0 - s.b_env / p.lambda);
  const double h = p.nu * s.b_env * s.c;
  const double f = p.sigma * demand * clamped;
  const double flow = p.mu * s.e * s.e;
  return {q - h, h - f - p.epsilon * s.b_stor, g_z * s.c + flow, g_kz * s.e - flow};
}

inline bool on_solved_branch(const State4& s, const ParameterSet& p) {
  const double demand = s.c + p.kappa * s.e;
  if (!(demand > 0.0)) return false;
  const double z = (s.b_stor / p.rho) / demand;
  return z >= 0.0 && z < 1.0 && p.kappa * z <= 1.0 + 1e-12;
}

// Solves the 4x4 system a x = b by Gaussian elimination with partial pivoting.
inline std::optional<std::array<double, 4>> solve4(std::array<std::array<double, 4>, 4> a,
                                                   std::array<double, 4> b) {
  for (std::size_t col = 0; col < 4; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (!(std::abs(a[piv][col]) > 0.0) || !std::isfinite(a[piv][col])) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < 4; ++r) {
      const double m = a[r][col] / a[col][col];
      for (std::size_t k = col; k < 4; ++k) a[r][k] -= m * a[col][k];
      b[r] -= m * b[col];
    }
  }
  std::array<double, 4> x{};
  for (std::size_t i = 4; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < 4; ++k) acc -= a[i][k] * x[k];
    x[i] = acc / a[i][i];
  }
  return x;
}

inline std::array<double, 4> to_array(const State4& s) { return {s.b_env, s.b_stor, s.c, s.e}; }
inline State4 from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

}  // namespace detail

/// Max-norm of the mobility rhs at s.
inline double equilibrium_residual(const State4& s, const Parameters& p) {
  return max_norm(detail::mobility_rhs_any(s, detail::mobility_params(p)));
}

/// Closed-form equilibrium block evaluated exactly as printed:
///   L1 = gamma xi1 (xi2 - xi1)(kappa sigma + 1) / (sigma + epsilon rho)
///   L2 = gamma xi1 mu / nu
///   L3 = sqrt((lambda L1)^2 + L2^2 - 6 lambda L1 L2 - 4 lambda xi1^2 L1) / L1
///   B_Env = (-L3 - (lambda L1 - L2)) / (2 L1)
///   B_Stor = gamma rho / (sigma + epsilon rho) B_Env (1 - B_Env / lambda)
///   C = (gamma / nu)(1 - B_Env / lambda)
///   E = ((xi1 - xi2) / xi1) B_Stor - C
/// The result is a candidate, not ground truth; callers compare residuals.
inline State4 closed_form_equilibrium(const Parameters& params) {
  const ParameterSet& p = detail::mobility_params(params);
  const double l1 = p.gamma * p.xi1 * (p.xi2 - p.xi1) * (p.kappa * p.sigma + 1.0) /
                    (p.sigma + p.epsilon * p.rho);
  const double l2 = p.gamma * p.xi1 * p.mu / p.nu;
  const double radicand = (p.lambda * l1) * (p.lambda * l1) + l2 * l2 -
                          6.0 * p.lambda * l1 * l2 - 4.0 * p.lambda * p.xi1 * p.xi1 * l1;
  if (radicand < 0.0) {
    throw Error(ErrorCode::NegativeRadicand, "L3 radicand is " + std::to_string(radicand));
  }
  const double l3 = std::sqrt(radicand) / l1;
  State4 s;
  s.b_env = (-l3 - (p.lambda * l1 - l2)) / (2.0 * l1);
  s.b_stor = p.gamma * p.rho / (p.sigma + p.epsilon * p.rho) * s.b_env *
             (1.0 - s.b_env / p.lambda);
  s.c = (p.gamma / p.nu) * (1.0 - s.b_env / p.lambda);
  s.e = ((p.xi1 - p.xi2) / p.xi1) * s.b_stor - s.c;
  return s;
}

/// The equilibrium conditions chained along the Z < 1, kappa Z <= 1 branch
/// and parametrised by B_Env:
///   C = (gamma/nu)(1 - B_Env/lambda)            from Q = H
///   B_Stor = nu B_Env C / (sigma/rho + epsilon) from B_Stor' = 0
///   E = ((xi2 - xi1)/(-xi1)) B_Stor/rho - C     from C' + E' = 0
/// residual is the Elite per-capita rate G(kappa Z) - mu E, which vanishes
/// exactly at interior equilibria. Only admissible points (C, E > 0 and the
/// branch conditions hold) carry a meaningful sign.
struct ReducedPoint {
  double b_env{};
  State4 state;
  bool admissible{false};
  double residual{};
};

inline ReducedPoint reduced_equilibrium_function(const ParameterSet& p, double b_env) {
  ReducedPoint out;
  out.b_env = b_env;
  const double c = (p.gamma / p.nu) * (1.0 - b_env / p.lambda);
  const double b_stor = p.nu * b_env * c / (p.sigma / p.rho + p.epsilon);
  const double supply = b_stor / p.rho;
  const double e = (p.xi2 - p.xi1) / (-p.xi1) * supply - c;
  out.state = {b_env, b_stor, c, e};
  if (!(c > 0.0) || !(e > 0.0)) return out;
  const double z = supply / (c + p.kappa * e);
  if (!(z < 1.0) || !(p.kappa * z <= 1.0)) return out;
  out.admissible = true;
  out.residual = eval_g(p.kappa * z, p) - p.mu * e;
  return out;
}

/// Samples the reduced function at n interior points of (0, lambda).
struct ReducedScan {
  std::vector<ReducedPoint> points;
  std::size_t admissible{0};
  std::size_t sign_changes{0};  ///< between consecutive admissible samples
  std::vector<std::pair<double, double>> brackets;
};

inline ReducedScan scan_reduced_function(const ParameterSet& p, std::size_t n = 10000) {
  ReducedScan scan;
  scan.points.reserve(n);
  const ReducedPoint* prev = nullptr;
  for (std::size_t i = 1; i <= n; ++i) {
    const double b = p.lambda * static_cast<double>(i) / static_cast<double>(n + 1);
    scan.points.push_back(reduced_equilibrium_function(p, b));
  }
  for (const auto& pt : scan.points) {
    if (!pt.admissible) {
      prev = nullptr;
      continue;
    }
    ++scan.admissible;
    if (prev && ((prev->residual < 0.0) != (pt.residual < 0.0))) {
      ++scan.sign_changes;
      scan.brackets.emplace_back(prev->b_env, pt.b_env);
    }
    prev = &pt;
  }
  return scan;
}

struct NewtonOutcome {
  State4 state;
  bool converged{false};
  double residual{};
  int iterations{};
};

/// Damped Newton on the mobility rhs with a forward-difference Jacobian
/// (relative step 1e-7). Steps are shortened to keep every component positive
/// and to decrease the residual.
inline NewtonOutcome newton_equilibrium(const ParameterSet& p, const State4& guess,
                                        int max_iter = 200) {
  NewtonOutcome out;
  auto x = detail::to_array(guess);
  auto f_of = [&p](const std::array<double, 4>& v) {
    return detail::to_array(detail::mobility_rhs_any(detail::from_array(v), p));
  };
  auto norm = [](const std::array<double, 4>& v) {
    double m = 0.0;
    for (double d : v) m = std::max(m, std::abs(d));
    return m;
  };
  auto scale = [&norm](const std::array<double, 4>& v) { return 1.0 + norm(v); };

  auto fx = f_of(x);
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    if (norm(fx) <= 1e-12 * scale(x)) {
      out.converged = true;
      break;
    }
    std::array<std::array<double, 4>, 4> jac{};
    for (std::size_t j = 0; j < 4; ++j) {
      auto xp = x;
      const double h = 1e-7 * std::max(std::abs(x[j]), 1e-7);
      xp[j] += h;
      const auto fp = f_of(xp);
      for (std::size_t i = 0; i < 4; ++i) jac[i][j] = (fp[i] - fx[i]) / h;
    }
    std::array<double, 4> rhs_vec{};
    for (std::size_t i = 0; i < 4; ++i) rhs_vec[i] = -fx[i];
    const auto dx = detail::solve4(jac, rhs_vec);
    if (!dx) break;

    double step = 1.0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (x[i] + (*dx)[i] <= 0.0) step = std::min(step, 0.9 * x[i] / -(*dx)[i]);
    }
    bool accepted = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      std::array<double, 4> trial{};
      for (std::size_t i = 0; i < 4; ++i) trial[i] = x[i] + step * (*dx)[i];
      const auto ft = f_of(trial);
      if (norm(ft) < norm(fx) || (step < 1e-12 && norm(ft) <= norm(fx))) {
        x = trial;
        fx = ft;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  out.state = detail::from_array(x);
  out.residual = norm(fx);
  if (!out.converged && out.residual <= 1e-12 * scale(x)) out.converged = true;
  return out;
}

/// Interior equilibrium of the mobility model on the Z < 1, kappa Z <= 1
/// branch. Newton from the guess first; if that fails or lands on a boundary
/// equilibrium, bisection on the reduced function over (0, lambda), keeping
/// the root nearest the guess.
inline State4 numerical_equilibrium(const Parameters& params, const State4& guess) {
  const ParameterSet& p = detail::mobility_params(params);
  if (!(guess.b_env > 0.0 && guess.b_stor > 0.0 && guess.c > 0.0 && guess.e > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "equilibrium guess must be strictly positive");
  }
  auto accept_tol = [](const State4& s) { return 1e-10 * (1.0 + s.max_abs()); };

  const NewtonOutcome nw = newton_equilibrium(p, guess);
  const bool interior = nw.state.c > 1e-9 * nw.state.max_abs() &&
                        nw.state.e > 1e-9 * nw.state.max_abs();
  if (nw.converged && interior && nw.residual < accept_tol(nw.state)) {
    if (!detail::on_solved_branch(nw.state, p)) {
      throw Error(ErrorCode::BranchViolated, "Newton root has Z >= 1 or kappa Z > 1");
    }
    return nw.state;
  }

  const ReducedScan scan = scan_reduced_function(p);
  std::optional<State4> best;
  for (const auto& [lo0, hi0] : scan.brackets) {
    double lo = lo0;
    double hi = hi0;
    double f_lo = reduced_equilibrium_function(p, lo).residual;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const ReducedPoint pm = reduced_equilibrium_function(p, mid);
      if (!pm.admissible) break;
      if ((pm.residual < 0.0) == (f_lo < 0.0)) {
        lo = mid;
        f_lo = pm.residual;
      } else {
        hi = mid;
      }
    }
    ReducedPoint root = reduced_equilibrium_function(p, 0.5 * (lo + hi));
    if (!root.admissible) continue;
    // Polish on the full system; the chained point is already a near-root.
    const NewtonOutcome polish = newton_equilibrium(p, root.state, 20);
    const State4 cand = polish.residual < max_norm(detail::mobility_rhs_any(root.state, p))
                            ? polish.state
                            : root.state;
    if (max_norm(detail::mobility_rhs_any(cand, p)) >= accept_tol(cand)) continue;
    if (!best || std::abs(cand.b_env - guess.b_env) < std::abs(best->b_env - guess.b_env)) {
      best = cand;
    }
  }
  if (!best) {
    throw Error(ErrorCode::NoConvergence,
                "no interior equilibrium found (Newton " + std::to_string(nw.iterations) +
                    " iterations, residual " + std::to_string(nw.residual) + "; " +
                    std::to_string(scan.sign_changes) + " reduced sign changes over " +
                    std::to_string(scan.admissible) + " admissible samples)");
  }
  if (!detail::on_solved_branch(*best, p)) {
    throw Error(ErrorCode::BranchViolated, "root has Z >= 1 or kappa Z > 1");
  }
  return *best;
}

/// Default Newton starting point.
inline State4 default_equilibrium_guess() { return {50.0, 1000.0, 50.0, 10.0}; }

struct EquilibriumResult {
  std::optional<State4> closed_form;
  std::optional<State4> numerical;
  std::optional<double> residual_closed;
  std::optional<double> residual_numerical;
  bool closed_branch_valid{false};
  bool numerical_branch_valid{false};
  std::optional<double> discrepancy;  ///< max-norm |closed - numerical|
  std::string closed_form_error;
  std::string numerical_error;
};

/// Runs both routes and reports residuals under the mobility rhs.
/// MobilityZero propagates; other failures are recorded in the result.
inline EquilibriumResult compare_equilibria(const Parameters& params,
                                            const State4& guess = default_equilibrium_guess()) {
  const ParameterSet& p = detail::mobility_params(params);
  EquilibriumResult r;
  try {
    r.closed_form = closed_form_equilibrium(params);
    r.residual_closed = max_norm(detail::mobility_rhs_any(*r.closed_form, p));
    r.closed_branch_valid = detail::on_solved_branch(*r.closed_form, p);
  } catch (const Error& e) {
    r.closed_form_error = e.what();
  }
  try {
    r.numerical = numerical_equilibrium(params, guess);
    r.residual_numerical = max_norm(detail::mobility_rhs_any(*r.numerical, p));
    r.numerical_branch_valid = true;
  } catch (const Error& e) {
    r.numerical_error = e.what();
  }
  if (r.closed_form && r.numerical) r.discrepancy = max_norm(*r.closed_form - *r.numerical);
  return r;
}

/// Integrates the mobility model from a scaled copy of an equilibrium and
/// reports how far the end state is from it. Observational only.
struct PerturbationProbe {
  double final_relative_deviation{};
  CollapseEvent collapse;
  State4 final_state;
};

inline PerturbationProbe perturbation_probe(const Parameters& params, const State4& equilibrium,
                                            double factor = 1.01, double t_end = 5000.0,
                                            double dt = 0.1) {
  detail::mobility_params(params);
  IntegrationConfig cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.sample_stride = 10;
  const Trajectory traj = integrate(factor * equilibrium, params, Variant::mobility, cfg);
  PerturbationProbe out;
  out.final_state = traj.back().state;
  const State4 d = out.final_state - equilibrium;
  out.final_relative_deviation =
      std::max({std::abs(d.b_env / equilibrium.b_env), std::abs(d.b_stor / equilibrium.b_stor),
                std::abs(d.c / equilibrium.c), std::abs(d.e / equilibrium.e)});
  out.collapse = detect_collapse(traj, 1e-6 * equilibrium.c * factor);
  return out;
}

}  // namespace handy
