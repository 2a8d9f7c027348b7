#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "handy/errors.hpp"
#include "handy/params.hpp"

namespace handy {

/// Instantaneous state: environmental food, stored food, Commoners, Elites.
struct State4 {
  double b_env{};
  double b_stor{};
  double c{};
  double e{};

  double b_total() const { return b_env + b_stor; }

  bool finite() const {
    return std::isfinite(b_env) && std::isfinite(b_stor) && std::isfinite(c) && std::isfinite(e);
  }
  bool non_negative() const { return b_env >= 0.0 && b_stor >= 0.0 && c >= 0.0 && e >= 0.0; }

  double max_abs() const {
    return std::max({std::abs(b_env), std::abs(b_stor), std::abs(c), std::abs(e)});
  }

  State4& operator+=(const State4& o) {
    b_env += o.b_env;
    b_stor += o.b_stor;
    c += o.c;
    e += o.e;
    return *this;
  }
  friend State4 operator+(State4 a, const State4& b) { return a += b; }
  friend State4 operator-(const State4& a, const State4& b) {
    return {a.b_env - b.b_env, a.b_stor - b.b_stor, a.c - b.c, a.e - b.e};
  }
  friend State4 operator*(double k, const State4& s) {
    return {k * s.b_env, k * s.b_stor, k * s.c, k * s.e};
  }
  bool operator==(const State4&) const = default;
};

inline double max_norm(const State4& s) { return s.max_abs(); }

/// Derived rates at a state: Q, H, Z, F, G(Z), G(kappa Z).
struct FluxBreakdown {
  double q{};
  double h{};
  double z{};
  double f{};
  double g_z{};
  double g_kz{};
};

enum class Variant { handy, handy_star, mobility };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::handy: return "handy";
    case Variant::handy_star: return "handy_star";
    case Variant::mobility: return "mobility";
  }
  return "handy";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "handy") return Variant::handy;
  if (s == "handy_star") return Variant::handy_star;
  if (s == "mobility") return Variant::mobility;
  throw Error(ErrorCode::ConfigParse, "unknown variant '" + std::string(s) + "'");
}

/// Per-capita change rate xi1 + (xi2 - xi1) * min{1, z}.
inline double eval_g(double z, double xi1, double xi2) {
  if (z < 0.0 || std::isnan(z)) throw Error(ErrorCode::NegativeZ, "z must be >= 0");
  return xi1 + (xi2 - xi1) * std::min(1.0, z);
}

inline double eval_g(double z, const ParameterSet& p) { return eval_g(z, p.xi1, p.xi2); }
inline double eval_g(double z, const Parameters& p) { return eval_g(z, p.xi1(), p.xi2()); }

namespace detail {

// Fluxes with parameters already evaluated at the current time.
inline FluxBreakdown fluxes_at(const State4& s, const ParameterSet& p) {
  FluxBreakdown out;
  out.q = p.gamma * s.b_env * (1.0 - s.b_env / p.lambda);
  out.h = p.nu * s.b_env * s.c;
  const double demand = s.c + p.kappa * s.e;
  double clamped;  // min{1, z}
  if (demand > 0.0) {
    out.z = (s.b_stor / p.rho) / demand;
    clamped = std::min(1.0, out.z);
  } else {
    // No people: any positive store is "plenty". F vanishes either way.
    out.z = s.b_stor > 0.0 ? 1.0 : 0.0;
    clamped = out.z;
  }
  out.f = p.sigma * demand * clamped;
  out.g_z = eval_g(out.z, p);
  out.g_kz = eval_g(p.kappa * out.z, p);
  return out;
}

inline State4 rhs_at(const State4& s, const ParameterSet& p, Variant variant,
                     const FluxBreakdown& fx) {
  State4 d{fx.q - fx.h, fx.h - fx.f - p.epsilon * s.b_stor, fx.g_z * s.c, fx.g_kz * s.e};
  if (variant == Variant::mobility) {
    const double flow = p.mu * s.e * s.e;
    d.c += flow;
    d.e -= flow;
  }
  return d;
}

inline State4 rhs_at(const State4& s, const ParameterSet& p, Variant variant) {
  return rhs_at(s, p, variant, fluxes_at(s, p));
}

}  // namespace detail

/// Throws VariantParameterMismatch unless the parameter kind fits the variant:
/// handy and mobility take constant parameters (mobility also needs mu > 0),
/// handy_star takes a schedule.
inline void require_variant_fits(const Parameters& p, Variant variant) {
  switch (variant) {
    case Variant::handy:
      if (p.time_varying()) {
        throw Error(ErrorCode::VariantParameterMismatch, "handy needs constant parameters");
      }
      break;
    case Variant::handy_star:
      if (!p.time_varying()) {
        throw Error(ErrorCode::VariantParameterMismatch, "handy_star needs a parameter schedule");
      }
      break;
    case Variant::mobility:
      if (p.time_varying()) {
        throw Error(ErrorCode::VariantParameterMismatch, "mobility needs constant parameters");
      }
      if (!(p.mu() > 0.0)) {
        throw Error(ErrorCode::VariantParameterMismatch, "mobility needs mu > 0");
      }
      break;
  }
}

inline FluxBreakdown eval_fluxes(const State4& s, const Parameters& p, double t = 0.0) {
  return detail::fluxes_at(s, p.at(t));
}

/// Time derivative of the state for the chosen model variant.
inline State4 rhs(const State4& s, const Parameters& p, double t, Variant variant) {
  require_variant_fits(p, variant);
  return detail::rhs_at(s, p.at(t), variant);
}

/// Food-equivalent total (c + e) * sigma / (xi2 - xi1) + b_stor. Its decay
/// rate is p.epsilon_hat().
inline double lyapunov_y(const State4& s, double sigma, double xi1, double xi2) {
  return (s.c + s.e) * sigma / (xi2 - xi1) + s.b_stor;
}

inline double lyapunov_y(const State4& s, const Parameters& p) {
  return lyapunov_y(s, p.sigma(), p.xi1(), p.xi2());
}

}  // namespace handy
