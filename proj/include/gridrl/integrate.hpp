#pragma once

/**
 * Integration against the randomization measures induced by a grid draw:
 * the time-mark measure (drift side), the Brownian-mark measures (one per
 * Brownian direction), and the marked jump measure, with or without
 * compensation.
 *
 * All three integrators share the same pairing convention as the path
 * solvers: a fine step [s_k, s_{k+1}] uses the control draw of the coarse
 * interval containing s_{k+1}, and the time argument is evaluated at the
 * left endpoint s_k. Keeping the convention identical on both sides is what
 * makes the per-interval summation identities hold to reordering precision
 * rather than discretization precision.
 */

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/model.hpp"
#include "gridrl/noise.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/**
 * One realization of all driving randomness on a refined simulation grid:
 * the control draw on the coarse partition, Brownian increments and marked
 * jump events on the fine grid, and the cached coarse-interval index of
 * every fine step.
 */
struct GridMeasurePanel {
  RandomizationDraw draw;
  Partition grid;
  BrownianPanel brownian;
  std::vector<JumpEvent> jumps;
  LevyMeasureSpec levy;
  std::vector<std::size_t> step_interval;  // coarse interval of step k (1-based)

  [[nodiscard]] std::size_t steps() const { return grid.intervals(); }

  /** Control draw governing fine step k (0-based step index). */
  [[nodiscard]] const Vec& control_draw(std::size_t k) const {
    return draw.value_on_interval(step_interval[k]);
  }

  void validate() const {
    brownian.validate();
    if (grid.horizon() != draw.partition.horizon())
      throw ConfigError("GridMeasurePanel: fine grid and control partition horizons differ");
    if (step_interval.size() != grid.intervals())
      throw ConfigError("GridMeasurePanel: step-interval cache has the wrong length");
    for (const auto& event : jumps)
      if (event.u.size() != draw.dim())
        throw ConfigError("GridMeasurePanel: jump marks do not match the draw dimension");
  }
};

namespace detail {

inline std::vector<std::size_t> map_steps_to_intervals(const Partition& fine,
                                                       const Partition& coarse) {
  std::vector<std::size_t> map(fine.intervals());
  for (std::size_t k = 0; k < fine.intervals(); ++k)
    map[k] = coarse.interval_containing(fine.t[k + 1]);
  return map;
}

}  // namespace detail

/** Assemble a panel from already-sampled pieces (marks are attached here). */
inline GridMeasurePanel assemble_grid_measure_panel(RandomizationDraw draw, Partition fine_grid,
                                                    BrownianPanel brownian,
                                                    std::vector<JumpEvent> jumps,
                                                    LevyMeasureSpec levy) {
  GridMeasurePanel panel;
  panel.step_interval = detail::map_steps_to_intervals(fine_grid, draw.partition);
  panel.draw = std::move(draw);
  panel.grid = std::move(fine_grid);
  panel.brownian = std::move(brownian);
  panel.levy = std::move(levy);
  panel.jumps = std::move(jumps);
  attach_grid_marks(panel.jumps, panel.draw);
  panel.validate();
  return panel;
}

/**
 * Sample a full panel for one path: the control draw on `control_partition`,
 * Brownian increments on its `refine`-fold refinement, and thinned jump
 * events with grid marks. Streams are derived per purpose and path index, so
 * panels for different paths are independent and reproducible.
 */
inline GridMeasurePanel build_grid_measure_panel(const Partition& control_partition,
                                                 std::size_t refine, std::size_t d, std::size_t p,
                                                 const LevyMeasureSpec& levy,
                                                 std::uint64_t master_seed,
                                                 std::size_t path_index = 0) {
  if (refine == 0) throw ConfigError("build_grid_measure_panel: refine must be >= 1");
  const auto fine = control_partition.refined(refine);
  auto draw = sample_grid_randomization(control_partition, d,
                                        SeedSpec{master_seed, "xi", path_index});
  auto brownian = sample_brownian(fine, p, SeedSpec{master_seed, "bm", path_index});
  std::vector<JumpEvent> jumps;
  if (levy.has_jumps()) {
    auto stream = derive_stream(SeedSpec{master_seed, "jump", path_index});
    jumps = sample_poisson_measure(levy, control_partition.horizon(), stream);
  }
  return assemble_grid_measure_panel(std::move(draw), fine, std::move(brownian), std::move(jumps),
                                     levy);
}

/**
 * Integral of Y(s, u) against the time-mark measure: the left-endpoint
 * quadrature sum over fine steps, each step paired with its interval's
 * control draw.
 */
template <typename F>
double integrate_MD(const GridMeasurePanel& panel, F&& y) {
  double acc = 0.0;
  for (std::size_t k = 0; k < panel.steps(); ++k) {
    const double dt = panel.grid.t[k + 1] - panel.grid.t[k];
    acc += dt * y(panel.grid.t[k], panel.control_draw(k));
  }
  return acc;
}

/**
 * Integral of Y(s, u) against the Brownian-mark measure of direction l:
 * Y at the step start times the step's Brownian increment.
 */
template <typename F>
double integrate_MB(const GridMeasurePanel& panel, F&& y, std::size_t l) {
  if (l >= panel.brownian.p)
    throw ConfigError("integrate_MB: Brownian direction " + std::to_string(l) + " out of range");
  double acc = 0.0;
  for (std::size_t k = 0; k < panel.steps(); ++k)
    acc += y(panel.grid.t[k], panel.control_draw(k)) * panel.brownian.dB[k][l];
  return acc;
}

namespace detail {

inline bool in_region(const Vec& z, double radius, JumpRegion region) {
  switch (region) {
    case JumpRegion::small:
      return norm2(z) <= radius;
    case JumpRegion::large:
      return norm2(z) > radius;
    case JumpRegion::all:
      return true;
  }
  throw ConfigError("in_region: unknown jump region");
}

inline void check_region_compatible(const LevyMeasureSpec& levy, JumpRegion region) {
  if (region == JumpRegion::small && levy.truncation_radius == 0.0)
    throw ConfigError("integrate_MJ: small-jump region is empty (truncation radius 0)");
  if (region == JumpRegion::large && std::isinf(levy.truncation_radius))
    throw ConfigError("integrate_MJ: large-jump region is empty (infinite truncation radius)");
}

}  // namespace detail

/**
 * Integral of Y(s, z, u) against the marked jump measure restricted to a
 * region of the size space. Uncompensated: the sum of Y over the realized
 * events in the region (marks as attached to the panel). Compensated:
 * additionally subtracts the left-endpoint quadrature of the predictable
 * compensator, integral over steps of Y(s_k, ., xi) d(nu) dt on the region.
 */
template <typename F>
double integrate_MJ(const GridMeasurePanel& panel, F&& y, JumpRegion region, bool compensated) {
  if (!panel.levy.has_jumps() && !panel.jumps.empty())
    throw ConfigError("integrate_MJ: panel has events but no jump measure");
  if (panel.levy.has_jumps()) detail::check_region_compatible(panel.levy, region);

  double acc = 0.0;
  const double radius = panel.levy.truncation_radius;
  for (const auto& event : panel.jumps) {
    if (detail::in_region(event.z, radius, region)) acc += y(event.t, event.z, event.u);
  }
  if (compensated && panel.levy.has_jumps()) {
    for (std::size_t k = 0; k < panel.steps(); ++k) {
      const double s = panel.grid.t[k];
      const double dt = panel.grid.t[k + 1] - panel.grid.t[k];
      const Vec& u = panel.control_draw(k);
      acc -= dt * panel.levy.integrate_z(
                      s, [&](const Vec& z) { return y(s, z, u); }, region);
    }
  }
  return acc;
}

}  // namespace gridrl
