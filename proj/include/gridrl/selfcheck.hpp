#pragma once

/**
 * Exact-identity self checks. Each check draws randomized (integrand,
 * partition, noise) instances and compares the measure-side integral against
 * an independently grouped per-interval summation of the same realization.
 * The two sides differ only by floating-point reordering, so they must agree
 * to near machine precision; a failure means the pairing convention between
 * draws, steps and events has drifted somewhere.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/integrate.hpp"
#include "gridrl/model.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/scenarios.hpp"

namespace gridrl {

/** Outcome of one identity check over all its randomized instances. */
struct IdentityCheck {
  std::string name;
  std::size_t instances = 0;
  std::size_t events_seen = 0;  // realized jump events across instances
  double max_rel_error = 0.0;
  bool pass = false;
};

namespace detail {

inline double identity_rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

/** Per-interval regrouped time-mark sum (independent of integrate_MD's order). */
template <typename F>
double regrouped_time_sum(const GridMeasurePanel& panel, F&& y) {
  double total = 0.0;
  for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
    const Vec& xi = panel.draw.value_on_interval(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < panel.steps(); ++k) {
      if (panel.step_interval[k] != i) continue;
      acc += (panel.grid.t[k + 1] - panel.grid.t[k]) * y(panel.grid.t[k], xi);
    }
    total += acc;
  }
  return total;
}

template <typename F>
double regrouped_brownian_sum(const GridMeasurePanel& panel, F&& y, std::size_t l) {
  double total = 0.0;
  for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
    const Vec& xi = panel.draw.value_on_interval(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < panel.steps(); ++k) {
      if (panel.step_interval[k] != i) continue;
      acc += y(panel.grid.t[k], xi) * panel.brownian.dB[k][l];
    }
    total += acc;
  }
  return total;
}

template <typename F>
double regrouped_jump_sum(const GridMeasurePanel& panel, F&& y, JumpRegion region,
                          bool compensated) {
  double total = 0.0;
  const double radius = panel.levy.truncation_radius;
  // Intervals walked back to front so the comparison genuinely reorders the
  // event terms rather than reproducing the measure-side accumulation order.
  for (std::size_t i = panel.draw.partition.intervals(); i >= 1; --i) {
    const Vec& xi = panel.draw.value_on_interval(i);
    for (const auto& event : panel.jumps) {
      if (panel.draw.partition.interval_containing(event.t) != i) continue;
      if (!detail::in_region(event.z, radius, region)) continue;
      total += y(event.t, event.z, xi);
    }
    if (compensated) {
      for (std::size_t k = 0; k < panel.steps(); ++k) {
        if (panel.step_interval[k] != i) continue;
        const double s = panel.grid.t[k];
        const double dt = panel.grid.t[k + 1] - panel.grid.t[k];
        total -= dt * panel.levy.integrate_z(
                          s, [&](const Vec& z) { return y(s, z, xi); }, region);
      }
    }
  }
  return total;
}

}  // namespace detail

/**
 * Run the four summation identities (time-mark, Brownian-mark, marked-jump,
 * compensated small-jump) on `instances` randomized realizations each and
 * report the worst relative deviation per identity against `tol`.
 */
inline std::vector<IdentityCheck> run_identity_checks(std::size_t instances = 20,
                                                      double tol = 1e-12,
                                                      std::uint64_t master_seed = 20240901) {
  if (instances == 0) throw ConfigError("run_identity_checks: need at least one instance");
  std::vector<IdentityCheck> checks{{"time-mark integral", instances, 0, 0.0, false},
                                    {"brownian-mark integral", instances, 0, 0.0, false},
                                    {"marked-jump integral", instances, 0, 0.0, false},
                                    {"compensated small-jump integral", instances, 0, 0.0, false}};

  for (std::size_t run = 0; run < instances; ++run) {
    Stream stream(SeedSpec{master_seed, "selfcheck", run});
    const auto coeff = [&stream]() { return 2.0 * stream.uniform() - 1.0; };
    const double c0 = coeff(), c1 = coeff(), c2 = coeff(), c3 = coeff();
    const double offset = 0.5 + stream.uniform();  // keeps the sums away from zero

    const std::size_t coarse_n = 3 + static_cast<std::size_t>(stream.uniform() * 10.0);
    const std::size_t refine = 4 + static_cast<std::size_t>(stream.uniform() * 20.0);
    const double horizon = 0.5 + 1.5 * stream.uniform();
    const double rate = 1.0 + 2.0 * stream.uniform();
    const auto coarse = Partition::uniform(horizon, coarse_n);
    const auto levy = make_compound_poisson_uniform(rate, 0.4, 1.6, 1.0);
    const auto panel = build_grid_measure_panel(coarse, refine, 2, 2, levy, master_seed, run);
    checks[2].events_seen += panel.jumps.size();
    checks[3].events_seen += panel.jumps.size();

    const auto y_time = [&](double s, const Vec& u) {
      return offset + c0 * std::sin(s) + c1 * u[0] * u[0] * s + c2 * u[1];
    };
    checks[0].max_rel_error =
        std::max(checks[0].max_rel_error,
                 detail::identity_rel_diff(integrate_MD(panel, y_time),
                                           detail::regrouped_time_sum(panel, y_time)));

    const auto y_brownian = [&](double s, const Vec& u) {
      return offset + c0 * std::cos(c1 * s) * (1.0 + c2 * u[1]) + c3 * u[0];
    };
    for (std::size_t l = 0; l < 2; ++l) {
      checks[1].max_rel_error =
          std::max(checks[1].max_rel_error,
                   detail::identity_rel_diff(integrate_MB(panel, y_brownian, l),
                                             detail::regrouped_brownian_sum(panel, y_brownian, l)));
    }

    const auto y_jump = [&](double s, const Vec& z, const Vec& u) {
      return (offset + c1 * z[0]) * (c2 + u[0]) * std::cos(c3 * s);
    };
    checks[2].max_rel_error =
        std::max(checks[2].max_rel_error,
                 detail::identity_rel_diff(
                     integrate_MJ(panel, y_jump, JumpRegion::all, false),
                     detail::regrouped_jump_sum(panel, y_jump, JumpRegion::all, false)));

    const auto y_comp = [&](double s, const Vec& z, const Vec& u) {
      return (offset + c0 * z[0] * z[0]) * (0.5 + c2 * u[1]) * (1.0 + c3 * s);
    };
    checks[3].max_rel_error =
        std::max(checks[3].max_rel_error,
                 detail::identity_rel_diff(
                     integrate_MJ(panel, y_comp, JumpRegion::small, true),
                     detail::regrouped_jump_sum(panel, y_comp, JumpRegion::small, true)));
  }

  for (auto& check : checks) check.pass = check.max_rel_error < tol;
  return checks;
}

}  // namespace gridrl
