#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/integrate.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/scenarios.hpp"

using namespace gridrl;

namespace {

GridMeasurePanel make_panel(std::uint64_t master, bool with_jumps,
                            std::size_t coarse_n = 8, std::size_t refine = 16) {
  const auto coarse = Partition::uniform(1.5, coarse_n);
  const auto levy = with_jumps ? make_compound_poisson_uniform(2.0, 0.5, 1.5, 1.0)
                               : LevyMeasureSpec{};
  return build_grid_measure_panel(coarse, refine, 2, 2, levy, master, 0);
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

}  // namespace

TEST_CASE("time-mark integral equals the per-interval summation", "[integrate]") {
  // Identity between the measure-side integral (library path: one pass with
  // interval lookup) and the sum over coarse intervals of plain Lebesgue
  // integrals at the frozen draw (test path: group-by-interval). Exact up to
  // floating-point reordering; checked on 20 independent realizations.
  const auto y = [](double s, const Vec& u) {
    return std::sin(s) + u[0] * u[0] * s + 0.3 * u[1];
  };
  for (std::uint64_t master = 0; master < 20; ++master) {
    const auto panel = make_panel(master, false);
    const double lhs = integrate_MD(panel, y);

    double rhs = 0.0;
    for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
      const Vec& xi = panel.draw.value_on_interval(i);
      double interval_acc = 0.0;
      for (std::size_t k = 0; k < panel.steps(); ++k) {
        if (panel.step_interval[k] != i) continue;
        interval_acc += (panel.grid.t[k + 1] - panel.grid.t[k]) * y(panel.grid.t[k], xi);
      }
      rhs += interval_acc;
    }
    REQUIRE(rel_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("Brownian-mark integral equals the per-interval summation", "[integrate]") {
  const auto y = [](double s, const Vec& u) { return std::cos(s) * (1.0 + u[1]); };
  for (std::uint64_t master = 0; master < 20; ++master) {
    const auto panel = make_panel(master, false);
    for (std::size_t l = 0; l < 2; ++l) {
      const double lhs = integrate_MB(panel, y, l);
      double rhs = 0.0;
      for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
        const Vec& xi = panel.draw.value_on_interval(i);
        double interval_acc = 0.0;
        for (std::size_t k = 0; k < panel.steps(); ++k) {
          if (panel.step_interval[k] != i) continue;
          interval_acc += y(panel.grid.t[k], xi) * panel.brownian.dB[k][l];
        }
        rhs += interval_acc;
      }
      REQUIRE(rel_diff(lhs, rhs) < 1e-12);
    }
  }
}

TEST_CASE("marked jump integral equals the per-interval event summation", "[integrate]") {
  const auto y = [](double s, const Vec& z, const Vec& u) {
    return z[0] * (1.0 + u[0]) * std::cos(s);
  };
  std::size_t total_events = 0;
  for (std::uint64_t master = 0; master < 20; ++master) {
    const auto panel = make_panel(master, true);
    total_events += panel.jumps.size();
    const double lhs = integrate_MJ(panel, y, JumpRegion::all, false);

    // Test path: group events by coarse interval and use that interval's
    // draw explicitly instead of the attached mark.
    double rhs = 0.0;
    for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
      const Vec& xi = panel.draw.value_on_interval(i);
      for (const auto& event : panel.jumps) {
        if (panel.draw.partition.interval_containing(event.t) != i) continue;
        REQUIRE(event.u == xi);  // attached mark is the covering interval's draw
        rhs += y(event.t, event.z, xi);
      }
    }
    REQUIRE(rel_diff(lhs, rhs) < 1e-12);
  }
  REQUIRE(total_events > 20);  // the identity was not checked on empty sums only
}

TEST_CASE("compensated jump integral subtracts the per-step predictable part", "[integrate]") {
  const auto y = [](double s, const Vec& z, const Vec& u) {
    return z[0] * z[0] * (0.5 + u[1]) * (1.0 + s);
  };
  for (std::uint64_t master = 0; master < 20; ++master) {
    const auto panel = make_panel(master, true);
    const double lhs = integrate_MJ(panel, y, JumpRegion::small, true);

    double rhs = integrate_MJ(panel, y, JumpRegion::small, false);
    for (std::size_t i = 1; i <= panel.draw.partition.intervals(); ++i) {
      const Vec& xi = panel.draw.value_on_interval(i);
      for (std::size_t k = 0; k < panel.steps(); ++k) {
        if (panel.step_interval[k] != i) continue;
        const double s = panel.grid.t[k];
        const double dt = panel.grid.t[k + 1] - panel.grid.t[k];
        rhs -= dt * panel.levy.integrate_z(
                        s, [&](const Vec& z) { return y(s, z, xi); }, JumpRegion::small);
      }
    }
    REQUIRE(rel_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("compensation centers the small-jump integral", "[integrate]") {
  // E of the compensated integral of z over small jumps is 0; its variance
  // is the nu-integral of z^2 over the small region (0.583 per unit time).
  const std::size_t runs = 2000;
  double sum = 0.0, sum_sq = 0.0;
  const auto coarse = Partition::uniform(1.0, 4);
  const auto levy = make_compound_poisson_uniform(2.0, 0.5, 1.5, 1.0);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto panel = build_grid_measure_panel(coarse, 8, 1, 1, levy, 4242, i);
    const double v =
        integrate_MJ(panel, [](double, const Vec& z, const Vec&) { return z[0]; },
                     JumpRegion::small, true);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(runs);
  const double var = sum_sq / static_cast<double>(runs) - mean * mean;
  const double target_var = 2.0 * (1.0 - 0.125) / 3.0;  // nu(z^2; small) * T
  REQUIRE(std::abs(mean) < 4.0 * std::sqrt(target_var / static_cast<double>(runs)));
  REQUIRE(std::abs(var - target_var) < 0.1);
}

TEST_CASE("left-endpoint time quadrature is exact on known sums", "[integrate]") {
  // Y(s, u) = s: the left-endpoint sum on a uniform grid is T^2/2 - T dt/2.
  const auto coarse = Partition::uniform(1.0, 4);
  const auto panel = build_grid_measure_panel(coarse, 1, 1, 1, LevyMeasureSpec{}, 1, 0);
  const double value = integrate_MD(panel, [](double s, const Vec&) { return s; });
  REQUIRE(std::abs(value - (0.5 - 0.25 / 2.0)) < 1e-15);  // T^2/2 - T dt/2 at dt = 1/4

  const auto fine = build_grid_measure_panel(coarse, 64, 1, 1, LevyMeasureSpec{}, 1, 0);
  const double refined = integrate_MD(fine, [](double s, const Vec&) { return s; });
  const double dt = 0.25 / 64.0;
  REQUIRE(std::abs(refined - (0.5 - dt / 2.0)) < 1e-14);
  REQUIRE(std::abs(refined - 0.5) < 0.002);  // converges to the Lebesgue value
}

TEST_CASE("draw-independent integrands give draw-independent integrals", "[integrate]") {
  // When Y ignores the mark. the result must be bitwise identical across
  // different randomization draws on the same grid and noise.
  const auto coarse = Partition::uniform(1.0, 8);
  const auto fine = coarse.refined(4);
  const auto brownian = sample_brownian(fine, 1, SeedSpec{55, "bm", 0});
  const auto draw_a = sample_grid_randomization(coarse, 1, SeedSpec{55, "xi", 0});
  const auto draw_b = sample_grid_randomization(coarse, 1, SeedSpec{56, "xi", 9});
  REQUIRE(draw_a.xi != draw_b.xi);

  const auto panel_a =
      assemble_grid_measure_panel(draw_a, fine, brownian, {}, LevyMeasureSpec{});
  const auto panel_b =
      assemble_grid_measure_panel(draw_b, fine, brownian, {}, LevyMeasureSpec{});

  const auto f_time = [](double s, const Vec&) { return std::exp(s); };
  REQUIRE(integrate_MD(panel_a, f_time) == integrate_MD(panel_b, f_time));
  REQUIRE(integrate_MB(panel_a, f_time, 0) == integrate_MB(panel_b, f_time, 0));
}

TEST_CASE("structural mismatches in panels and regions are input errors", "[integrate]") {
  const auto coarse = Partition::uniform(1.0, 4);
  REQUIRE_THROWS_AS(build_grid_measure_panel(coarse, 0, 1, 1, LevyMeasureSpec{}, 1, 0),
                    ConfigError);

  // Horizon mismatch between the draw and the fine grid.
  const auto other = Partition::uniform(2.0, 8);
  auto draw = sample_grid_randomization(coarse, 1, SeedSpec{1, "xi", 0});
  auto brownian = sample_brownian(other, 1, SeedSpec{1, "bm", 0});
  REQUIRE_THROWS_AS(
      assemble_grid_measure_panel(draw, other, brownian, {}, LevyMeasureSpec{}),
      ConfigError);

  const auto panel = build_grid_measure_panel(coarse, 2, 1, 1, LevyMeasureSpec{}, 1, 0);
  REQUIRE_THROWS_AS(integrate_MB(panel, [](double, const Vec&) { return 1.0; }, 1), ConfigError);

  // Degenerate regions: radius 0 has no small region, radius infinity no large.
  const auto zero_radius = make_compound_poisson_uniform(2.0, 0.5, 1.5, 0.0);
  const auto panel_zero = build_grid_measure_panel(coarse, 2, 1, 1, zero_radius, 2, 0);
  const auto y_jump = [](double, const Vec& z, const Vec&) { return z[0]; };
  REQUIRE_THROWS_AS(integrate_MJ(panel_zero, y_jump, JumpRegion::small, false), ConfigError);
  REQUIRE_NOTHROW(integrate_MJ(panel_zero, y_jump, JumpRegion::large, false));

  const auto inf_radius = make_compound_poisson_uniform(
      2.0, 0.5, 1.5, std::numeric_limits<double>::infinity());
  const auto panel_inf = build_grid_measure_panel(coarse, 2, 1, 1, inf_radius, 3, 0);
  REQUIRE_THROWS_AS(integrate_MJ(panel_inf, y_jump, JumpRegion::large, false), ConfigError);
  REQUIRE_NOTHROW(integrate_MJ(panel_inf, y_jump, JumpRegion::small, true));

  // A panel without a jump measure integrates jumps to zero.
  REQUIRE(integrate_MJ(panel, y_jump, JumpRegion::all, false) == 0.0);
}
