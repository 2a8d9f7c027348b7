// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any is red.

#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "handy/harness/app.hpp"

using namespace handy;
using namespace handy::harness;

namespace {

int failures = 0;

void verdict(int id, const std::string& title, bool ok, const std::string& detail) {
  std::printf("[%s] %2d %s :: %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string opt(const std::optional<double>& x) { return x ? num(*x) : std::string("none"); }

const Parameters& defaults() {
  static const Parameters p = validate_params(ParameterSet::typical());
  return p;
}

Trajectory run(const State4& x0, double t_end, std::size_t stride, double dt = 0.1) {
  IntegrationConfig cfg;
  cfg.dt = dt;
  cfg.t_end = t_end;
  cfg.sample_stride = stride;
  return integrate(x0, defaults(), Variant::handy, cfg);
}

ScenarioConfig shipped(const std::string& name) {
  return load_config(fs::path(HANDY_SCENARIO_DIR) / (name + ".json"), {});
}

constexpr State4 kRight{300.0, 0.0, 1000.0, 1.0};
constexpr State4 kLeft{300.0, 0.0, 1000.0, 0.0};

}  // namespace

int main() {
  // 1. Collapse with E(0) = 1.
  const auto t0 = std::chrono::steady_clock::now();
  const Trajectory right = run(kRight, 50000.0, 1);
  const CollapseEvent ev = detect_collapse(right, 1e-3);
  const CheckResult ratio = check_lyapunov_ratio(right);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::string extra;
    if (!ev.t_e_below) {
      const Trajectory longer = run(kRight, 1e6, 1000);
      extra = "; E crosses 1e-3 at t=" + opt(detect_collapse(longer, 1e-3).t_e_below) +
              " on a 1e6 horizon";
    }
    verdict(1, "collapse scenario", ev.both() && ratio.pass && secs < 10.0,
            "t_C=" + opt(ev.t_c_below) + " t_E=" + opt(ev.t_e_below) + " E(50000)=" +
                num(right.back().state.e) + " v_ratio worst=" + num(ratio.worst_violation) +
                " runtime=" + num(secs) + "s" + extra);
  }

  // 2. Non-collapse control with E(0) = 0.
  const Trajectory left = run(kLeft, 2000.0, 1);
  {
    double c_min = left.front().state.c;
    double t_min = 0.0;
    int maxima = 0;
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double c = left.samples[i].state.c;
      if (c < c_min) {
        c_min = c;
        t_min = left.samples[i].t;
      }
      if (i > 0 && i + 1 < left.size() && c > left.samples[i - 1].state.c &&
          c >= left.samples[i + 1].state.c) {
        ++maxima;
      }
    }
    const auto region = build_trapping_region(defaults(), kLeft);
    const bool bounded = check_containment(left, region).pass;
    verdict(2, "non-collapse control", c_min > 1.0 && bounded && maxima >= 2,
            "min C=" + num(c_min) + " at t=" + num(t_min) + " local maxima of C=" +
                std::to_string(maxima) + " bounded=" + (bounded ? "yes" : "no"));
  }

  // 3. Trapping region.
  {
    const auto region = build_trapping_region(defaults(), kRight);
    const auto r1 = check_containment(right, region);
    const auto r2 = check_containment(left, build_trapping_region(defaults(), kLeft));
    const bool values = region.b4 == 1e7 && std::abs(region.c5 - 118125.0) < 1e-6;
    verdict(3, "trapping region", values && r1.pass && r2.pass,
            "b4=" + num(region.b4) + " c5=" + num(region.c5) + " worst(E0=1)=" +
                num(r1.worst_violation) + " worst(E0=0)=" + num(r2.worst_violation));
  }

  // 4. Three-birds inequality and its integral form on every shipped scenario.
  {
    bool ok = true;
    std::ostringstream os;
    for (const char* name : {"fig1-left", "fig1-right", "mobility", "handy-star"}) {
      const ScenarioConfig cfg = shipped(name);
      const Parameters p = cfg.validated();
      const Trajectory t = integrate(cfg.initial, p, cfg.variant, cfg.integration);
      const auto tb = check_three_birds(t, p);
      const auto gw = check_gronwall_decay(t, p);
      ok = ok && tb.pass && gw.pass;
      os << name << ": slack " << num(-tb.worst_violation) << ", integral worst "
         << num(gw.worst_violation) << " tol " << num(gw.tolerance) << "; ";
    }
    verdict(4, "three-birds inequality", ok, os.str());
  }

  // 5. Rate ordering, exactly.
  {
    std::mt19937_64 rng(20240521);
    std::uniform_real_distribution<double> z_dist(0.0, 4.0);
    std::uniform_real_distribution<double> k_dist(1.0, 20.0);
    std::size_t bad_random = 0;
    for (int i = 0; i < 100000; ++i) {
      const double z = z_dist(rng);
      double k = k_dist(rng);
      if (k == 1.0) k = 1.5;
      if (eval_g(k * z, -0.04, 0.02) < eval_g(z, -0.04, 0.02)) ++bad_random;
    }
    std::size_t bad_samples = 0;
    std::size_t samples = 0;
    for (const Trajectory* t : {&right, &left}) {
      for (const auto& s : t->samples) {
        ++samples;
        if (s.flux.g_kz < s.flux.g_z) ++bad_samples;
      }
    }
    verdict(5, "rate ordering", bad_random == 0 && bad_samples == 0,
            "random violations=" + std::to_string(bad_random) + "/100000, sample violations=" +
                std::to_string(bad_samples) + "/" + std::to_string(samples));
  }

  // 6. Rate gap on the collapse trajectory.
  {
    const auto r = check_rate_gap(right, defaults());
    const double eps2 = defaults().rate_gap_epsilon();
    verdict(6, "rate gap", r.pass && !r.vacuous && std::abs(eps2 - 5.7143e-3) < 1e-7,
            r.detail + " worst=" + num(r.worst_violation));
  }

  // 7. Time-varying regeneration rate.
  {
    auto s = ParameterSchedule::from(ParameterSet::typical());
    s.gamma = TimeFunction(TimeFunction::Sinusoid{0.01, 0.5, 0.01, 0.0});
    bool ok = true;
    std::string detail;
    try {
      const Parameters p = validate_params(s);
      const auto& b = p.bounds();
      const bool bounded = b.gamma.inf > 0 && std::isfinite(b.gamma.sup) &&
                           std::isfinite(b.gamma.sup_abs_derivative) && b.kappa.inf > 1.0 &&
                           b.lambda.inf > 0 && b.epsilon.inf > 0 && b.rho.inf > 0 &&
                           b.nu.inf > 0;
      IntegrationConfig cfg;
      cfg.dt = 0.1;
      cfg.t_end = 1e6;
      cfg.sample_stride = 1000;
      const Trajectory t = integrate(kRight, p, Variant::handy_star, cfg);
      const CollapseEvent e = detect_collapse(t, 1e-3);
      const auto region = build_trapping_region(p, kRight);
      const bool contained = check_containment(t, region).pass;
      ok = bounded && e.both() && contained;
      detail = "gamma in [" + num(b.gamma.inf) + ", " + num(b.gamma.sup) + "], |gamma'| <= " +
               num(b.gamma.sup_abs_derivative) + ", t_C=" + opt(e.t_c_below) +
               " t_E=" + opt(e.t_e_below) + " contained=" + (contained ? "yes" : "no");
    } catch (const Error& e) {
      ok = false;
      detail = e.what();
    }
    verdict(7, "time-varying robustness", ok, detail);
  }

  // 8. Mobility equilibrium.
  {
    auto ps = ParameterSet::typical();
    ps.mu = 1e-4;
    const Parameters p = validate_params(ps);
    const EquilibriumResult r = compare_equilibria(p, default_equilibrium_guess());
    std::string detail = "closed form ";
    if (r.closed_form) {
      const State4& c = *r.closed_form;
      detail += "(" + num(c.b_env) + ", " + num(c.b_stor) + ", " + num(c.c) + ", " + num(c.e) +
                ") residual " + opt(r.residual_closed);
    } else {
      detail += "failed: " + r.closed_form_error;
    }
    bool ok = false;
    if (r.numerical) {
      const PerturbationProbe probe = perturbation_probe(p, *r.numerical);
      ok = *r.residual_numerical < 1e-10 && !probe.collapse.any();
      detail += "; numerical residual " + opt(r.residual_numerical) +
                ", deviation after perturbation " + num(probe.final_relative_deviation);
    } else {
      detail += "; numerical: " + r.numerical_error;
    }
    verdict(8, "mobility equilibrium", ok, detail);
  }

  // 9. No equilibrium without mobility.
  {
    auto ps = ParameterSet::typical();
    ps.mu = 0.0;
    const ReducedScan scan = scan_reduced_function(ps, 10000);
    verdict(9, "no interior root without mobility", scan.sign_changes == 0,
            "sign changes=" + std::to_string(scan.sign_changes) + " over " +
                std::to_string(scan.points.size()) + " points (" +
                std::to_string(scan.admissible) + " admissible)");
  }

  // 10. Integrator order and step-halving agreement.
  {
    IntegrationConfig seg;
    seg.dt = 0.5;
    seg.t_end = 20.0;
    const OrderEstimate est = convergence_check(kRight, defaults(), Variant::handy, seg);
    const State4 a = run(kRight, 100.0, 1000, 0.1).back().state;
    const State4 b = run(kRight, 100.0, 2000, 0.05).back().state;
    const double rel = max_norm(a - b) / max_norm(b);
    verdict(10, "integrator order", est.order >= 3.5 && est.order <= 4.5 && rel < 1e-6,
            "observed order=" + num(est.order) + " step-halving rel diff=" + num(rel));
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
