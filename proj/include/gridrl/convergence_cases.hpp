#pragma once

/**
 * Named diagnostic cases for the triangular-array convergence study. Each
 * case isolates one driving term (drift, Brownian, jumps) with a test
 * function whose limit target is known in closed form, so mesh-refinement
 * tables have an exact reference:
 *
 *  - "drift":    deterministic increments; the summed estimate is exactly
 *                n*sin(1/n) on the unit horizon, converging to 1 at rate 1/n.
 *  - "brownian": unit diffusion with g(y) = 1 - cos(sqrt(2) y); interval
 *                expectations are 1 - exp(-dt), so the error at mesh n is
 *                exactly 1 - n(1 - exp(-1/n)), again of order 1/n.
 *  - "jump":     compound Poisson only; increments do not shrink with the
 *                mesh, so the error is mesh-flat and stays inside the Monte
 *                Carlo band once the multi-jump correction is below it.
 *  - "zero":     empty bundle; every table entry must be identically zero.
 */

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gridrl/characteristics.hpp"
#include "gridrl/core.hpp"
#include "gridrl/model.hpp"
#include "gridrl/scenarios.hpp"

namespace gridrl {

/** Everything convergence_report needs to run one named diagnostic. */
struct ConvergenceCase {
  std::string name;
  TestFunctionBundle bundle;
  SmoothTestFunction g;
  double horizon = 1.0;
  LevyMeasureSpec levy;
  std::vector<std::size_t> meshes{4, 16, 64, 256};
  PreLimitSimConfig sim;
  bool mesh_dependent = true;  // whether errors are expected to shrink with n
};

inline std::vector<std::string> convergence_case_names() {
  return {"drift", "brownian", "jump", "zero"};
}

inline ConvergenceCase make_convergence_case(const std::string& name, std::size_t n_paths,
                                             std::uint64_t master_seed) {
  ConvergenceCase c;
  c.name = name;
  c.sim.n_paths = n_paths;
  c.sim.master_seed = master_seed;
  if (name == "drift") {
    c.bundle.drift_map = [](double, const Vec&) { return Vec{1.0}; };
    c.bundle.sup_drift = 1.0;
    c.g.value = [](const Vec& y) { return std::sin(y[0]); };
    c.g.grad0 = Vec{1.0};
    c.g.hess0 = Mat(1, 1);
    c.sim.substeps = 8;
  } else if (name == "brownian") {
    c.bundle.brownian_maps = {[](double, const Vec&) { return Vec{1.0}; }};
    c.bundle.sup_brownian = Vec{1.0};
    const double freq = std::sqrt(2.0);
    c.g.value = [freq](const Vec& y) { return 1.0 - std::cos(freq * y[0]); };
    c.g.grad0 = Vec{0.0};
    c.g.hess0 = Mat(1, 1);
    c.g.hess0(0, 0) = freq * freq;
    c.sim.substeps = 1;  // Brownian increments are exact at any substep count
  } else if (name == "jump") {
    const double rate = 0.3, size = 0.9;
    c.levy = make_compound_poisson_uniform(rate, 0.5, 1.5, 0.25);
    c.bundle.levy_radius = 0.25;
    c.bundle.large_jump_map = [size](double, const Vec&, const Vec&) { return Vec{size}; };
    c.bundle.sup_large = size;
    c.g.value = [](const Vec& y) { return std::sin(y[0]); };
    c.g.grad0 = Vec{1.0};
    c.g.hess0 = Mat(1, 1);
    c.sim.substeps = 1;  // no continuous part to resolve between jumps
    c.mesh_dependent = false;
  } else if (name == "zero") {
    c.g.value = [](const Vec& y) { return std::sin(y[0]); };
    c.g.grad0 = Vec{1.0};
    c.g.hess0 = Mat(1, 1);
    c.sim.substeps = 1;
  } else {
    throw ConfigError("make_convergence_case: unknown case '" + name +
                      "' (expected drift, brownian, jump, or zero)");
  }
  return c;
}

/** Run one named diagnostic end to end. */
inline ConvergenceReport run_convergence_case(const ConvergenceCase& c) {
  return convergence_report(c.bundle, c.g, c.horizon, c.meshes, c.levy,
                            tensor_gauss_unit_cube(c.bundle.d, 16), c.sim);
}

}  // namespace gridrl
