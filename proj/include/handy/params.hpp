#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "handy/errors.hpp"

namespace handy {

/// Constant model parameters. rho is the stored-food distribution time
/// (the reciprocal of the maximum distribution rate); configs supply rho_inv.
struct ParameterSet {
  double nu{};       ///< harvesting factor
  double lambda{};   ///< environmental resource capacity
  double gamma{};    ///< maximum regeneration rate
  double epsilon{};  ///< stored-food decay rate
  double sigma{};    ///< subsistence food per capita
  double rho{};      ///< 1 / maximum food distribution rate
  double kappa{};    ///< inequality factor
  double xi1{};      ///< minimum per-capita change rate (< 0)
  double xi2{};      ///< maximum per-capita change rate (> 0)
  double mu{};       ///< Elite-to-Commoner mobility factor

  /// The shipped defaults ("typical values").
  static ParameterSet typical() {
    ParameterSet p;
    p.xi1 = -0.04;
    p.xi2 = 0.02;
    p.nu = 1.67e-5;
    p.gamma = 0.01;
    p.sigma = 5e-4;
    p.rho = 1.0 / 5e-3;
    p.lambda = 100.0;
    p.kappa = 1.5;
    p.epsilon = 1e-5;
    p.mu = 1e-4;
    return p;
  }

  double rho_inv() const { return 1.0 / rho; }

  /// Food level at which G vanishes.
  double zeta() const { return -xi1 / (xi2 - xi1); }

  bool operator==(const ParameterSet&) const = default;
};

/// A scalar function of time: constant, c*(1 + a*sin(omega*t + phi)), or a
/// continuous piecewise-linear interpolant (held constant outside the knots).
class TimeFunction {
 public:
  struct Constant {
    double value{};
  };
  struct Sinusoid {
    double c{};
    double a{};
    double omega{};
    double phi{};
  };
  struct PiecewiseLinear {
    std::vector<std::pair<double, double>> knots;  ///< (t, value), t increasing
  };

  TimeFunction() = default;
  TimeFunction(double value) : f_(Constant{value}) {}  // NOLINT: implicit by design of configs
  TimeFunction(Sinusoid s) : f_(s) {}
  TimeFunction(PiecewiseLinear p) : f_(std::move(p)) {
    const auto& k = std::get<PiecewiseLinear>(f_).knots;
    if (k.empty()) {
      throw Error(ErrorCode::InvalidConfig, "piecewise-linear schedule needs at least one knot");
    }
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!std::isfinite(k[i].first) || !std::isfinite(k[i].second)) {
        throw Error(ErrorCode::InvalidConfig, "piecewise-linear knot is not finite");
      }
      if (i > 0 && !(k[i].first > k[i - 1].first)) {
        throw Error(ErrorCode::InvalidConfig, "piecewise-linear knot times must increase strictly");
      }
    }
  }

  bool is_constant() const { return std::holds_alternative<Constant>(f_); }
  const auto& variant() const { return f_; }

  double operator()(double t) const {
    return std::visit(
        [t](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return f.value;
          } else if constexpr (std::is_same_v<F, Sinusoid>) {
            return f.c * (1.0 + f.a * std::sin(f.omega * t + f.phi));
          } else {
            const auto& k = f.knots;
            if (t <= k.front().first) return k.front().second;
            if (t >= k.back().first) return k.back().second;
            auto it = std::upper_bound(k.begin(), k.end(), t,
                                       [](double x, const auto& kn) { return x < kn.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double w = (t - lo.first) / (hi.first - lo.first);
            return lo.second + w * (hi.second - lo.second);
          }
        },
        f_);
  }

  /// Exact infimum over t >= 0 (knots for piecewise-linear).
  double infimum() const { return extremes().first; }
  double supremum() const { return extremes().second; }

  double sup_abs_derivative() const {
    return std::visit(
        [](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return 0.0;
          } else if constexpr (std::is_same_v<F, Sinusoid>) {
            return std::abs(f.c * f.a * f.omega);
          } else {
            double m = 0.0;
            for (std::size_t i = 1; i < f.knots.size(); ++i) {
              const auto& [t0, v0] = f.knots[i - 1];
              const auto& [t1, v1] = f.knots[i];
              m = std::max(m, std::abs((v1 - v0) / (t1 - t0)));
            }
            return m;
          }
        },
        f_);
  }

 private:
  std::pair<double, double> extremes() const {
    return std::visit(
        [](const auto& f) -> std::pair<double, double> {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Constant>) {
            return {f.value, f.value};
          } else if constexpr (std::is_same_v<F, Sinusoid>) {
            // Only |a| matters once omega != 0: the phase sweeps a full period.
            if (f.omega == 0.0) {
              const double v = f.c * (1.0 + f.a * std::sin(f.phi));
              return {v, v};
            }
            const double lo = f.c * (1.0 - std::abs(f.a));
            const double hi = f.c * (1.0 + std::abs(f.a));
            return {std::min(lo, hi), std::max(lo, hi)};
          } else {
            double lo = f.knots.front().second;
            double hi = lo;
            for (const auto& kn : f.knots) {
              lo = std::min(lo, kn.second);
              hi = std::max(hi, kn.second);
            }
            return {lo, hi};
          }
        },
        f_);
  }

  std::variant<Constant, Sinusoid, PiecewiseLinear> f_{Constant{}};
};

/// Time-varying parameters. sigma, xi1, xi2 stay constant.
struct ParameterSchedule {
  TimeFunction lambda;
  TimeFunction gamma;
  TimeFunction epsilon;
  TimeFunction rho;
  TimeFunction nu;
  TimeFunction kappa;
  double sigma{};
  double xi1{};
  double xi2{};

  /// Schedule with every function constant at the given set's values.
  static ParameterSchedule from(const ParameterSet& p) {
    ParameterSchedule s;
    s.lambda = p.lambda;
    s.gamma = p.gamma;
    s.epsilon = p.epsilon;
    s.rho = p.rho;
    s.nu = p.nu;
    s.kappa = p.kappa;
    s.sigma = p.sigma;
    s.xi1 = p.xi1;
    s.xi2 = p.xi2;
    return s;
  }
};

struct Bounds {
  double inf{};
  double sup{};
  double sup_abs_derivative{};
};

/// inf/sup of every parameter; for constant sets inf == sup.
struct ParameterBounds {
  Bounds lambda, gamma, epsilon, rho, nu, kappa;
};

/// Validated parameters with derived quantities attached. Only obtainable via
/// validate_params, so holding one means the invariants hold.
class Parameters {
 public:
  bool time_varying() const { return schedule_.has_value(); }

  /// Parameter values in force at time t.
  ParameterSet at(double t) const {
    if (!schedule_) return constant_;
    const auto& s = *schedule_;
    ParameterSet p;
    p.lambda = s.lambda(t);
    p.gamma = s.gamma(t);
    p.epsilon = s.epsilon(t);
    p.rho = s.rho(t);
    p.nu = s.nu(t);
    p.kappa = s.kappa(t);
    p.sigma = s.sigma;
    p.xi1 = s.xi1;
    p.xi2 = s.xi2;
    p.mu = 0.0;
    return p;
  }

  /// The constant set; for a schedule this is the value at t = 0.
  const ParameterSet& base() const { return constant_; }
  const std::optional<ParameterSchedule>& schedule() const { return schedule_; }

  double sigma() const { return constant_.sigma; }
  double xi1() const { return constant_.xi1; }
  double xi2() const { return constant_.xi2; }
  double mu() const { return constant_.mu; }
  double zeta() const { return constant_.zeta(); }

  /// min{|xi1|, inf epsilon}: guaranteed decay rate of the food-equivalent total.
  double epsilon_hat() const { return std::min(std::abs(constant_.xi1), bounds_.epsilon.inf); }

  /// inf over t of (kappa - 1)/(kappa + 2) times -xi1. Increasing in kappa, so
  /// the infimum sits at inf kappa.
  double rate_gap_epsilon() const {
    const double k = bounds_.kappa.inf;
    return (k - 1.0) / (k + 2.0) * (-constant_.xi1);
  }

  const ParameterBounds& bounds() const { return bounds_; }

 private:
  Parameters() = default;
  friend Parameters validate_params(const ParameterSet&);
  friend Parameters validate_params(const ParameterSchedule&);

  ParameterSet constant_;
  std::optional<ParameterSchedule> schedule_;
  ParameterBounds bounds_;
};

namespace detail {

inline Bounds bounds_of(const TimeFunction& f) {
  return {f.infimum(), f.supremum(), f.sup_abs_derivative()};
}

inline void check_constants(double sigma, double xi1, double xi2,
                            std::vector<Diagnostic>& out) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    out.push_back({ErrorCode::NonPositiveParameter, "sigma", "must be finite and > 0"});
  }
  if (!(xi1 < 0.0 && xi2 > 0.0) || !std::isfinite(xi1) || !std::isfinite(xi2)) {
    out.push_back({ErrorCode::XiSignsWrong, "xi1/xi2", "need xi1 < 0 < xi2"});
  }
}

}  // namespace detail

/// Checks the constant-parameter model conditions. Throws ValidationError
/// listing every violated field.
inline Parameters validate_params(const ParameterSet& p) {
  std::vector<Diagnostic> diags;
  const std::pair<const char*, double> positive[] = {
      {"lambda", p.lambda}, {"gamma", p.gamma}, {"epsilon", p.epsilon},
      {"rho", p.rho},       {"nu", p.nu}};
  for (const auto& [name, v] : positive) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      diags.push_back({ErrorCode::NonPositiveParameter, name, "must be finite and > 0"});
    }
  }
  detail::check_constants(p.sigma, p.xi1, p.xi2, diags);
  if (!(p.kappa > 1.0) || !std::isfinite(p.kappa)) {
    diags.push_back({ErrorCode::KappaNotGreaterThanOne, "kappa", "must be > 1"});
  }
  if (!(p.mu >= 0.0) || !std::isfinite(p.mu)) {
    diags.push_back({ErrorCode::NonPositiveParameter, "mu", "must be finite and >= 0"});
  }
  if (!diags.empty()) throw ValidationError(std::move(diags));

  Parameters out;
  out.constant_ = p;
  auto fixed = [](double v) { return Bounds{v, v, 0.0}; };
  out.bounds_ = {fixed(p.lambda), fixed(p.gamma), fixed(p.epsilon),
                 fixed(p.rho),    fixed(p.nu),    fixed(p.kappa)};
  return out;
}

/// Checks the time-varying conditions: positive infima, inf kappa > 1, finite
/// sups and derivative bounds.
inline Parameters validate_params(const ParameterSchedule& s) {
  std::vector<Diagnostic> diags;
  const std::pair<const char*, const TimeFunction*> positive[] = {
      {"lambda", &s.lambda}, {"gamma", &s.gamma}, {"epsilon", &s.epsilon},
      {"rho", &s.rho},       {"nu", &s.nu}};
  auto finite_bounds = [&](const char* name, const TimeFunction& f) {
    const Bounds b = detail::bounds_of(f);
    if (!std::isfinite(b.inf) || !std::isfinite(b.sup) || !std::isfinite(b.sup_abs_derivative)) {
      diags.push_back({ErrorCode::ScheduleInfimumViolation, name,
                       "schedule bounds must be finite"});
      return false;
    }
    if (const auto* sin = std::get_if<TimeFunction::Sinusoid>(&f.variant());
        sin && !(std::abs(sin->a) < 1.0)) {
      diags.push_back({ErrorCode::ScheduleInfimumViolation, name, "sinusoid needs |a| < 1"});
      return false;
    }
    return true;
  };
  for (const auto& [name, f] : positive) {
    if (!finite_bounds(name, *f)) continue;
    if (!(f->infimum() > 0.0)) {
      diags.push_back({f->is_constant() ? ErrorCode::NonPositiveParameter
                                        : ErrorCode::ScheduleInfimumViolation,
                       name, "infimum must be > 0"});
    }
  }
  if (finite_bounds("kappa", s.kappa) && !(s.kappa.infimum() > 1.0)) {
    diags.push_back({ErrorCode::KappaNotGreaterThanOne, "kappa", "infimum must be > 1"});
  }
  detail::check_constants(s.sigma, s.xi1, s.xi2, diags);
  if (!diags.empty()) throw ValidationError(std::move(diags));

  Parameters out;
  out.schedule_ = s;
  out.bounds_ = {detail::bounds_of(s.lambda), detail::bounds_of(s.gamma),
                 detail::bounds_of(s.epsilon), detail::bounds_of(s.rho),
                 detail::bounds_of(s.nu),      detail::bounds_of(s.kappa)};
  out.constant_ = out.at(0.0);
  return out;
}

}  // namespace handy
