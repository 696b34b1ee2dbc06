/**
 * Demo: the realized covariation of a pair of randomized controls depends on
 * how the randomization is executed.
 *
 * Two Gaussian executors share one uniform randomization source. Under
 * grid sampling (and its limit dynamics) the shared source couples the
 * executed actions, so the pair covariation at the horizon approaches
 * mu1*mu2 + sigma1*sigma2. Under the averaged (exploratory) dynamics each
 * system carries its own deterministic diffusion sqrt of the relaxed second
 * moment, and the same functional approaches
 * sqrt((mu1^2+sigma1^2)(mu2^2+sigma2^2)) instead.
 */

#include <cmath>
#include <cstdio>
#include <vector>

#include "gridrl/gridrl.hpp"

int main() {
  using namespace gridrl;
  const auto scenario = make_scenario("two_controls");
  const std::size_t paths = 2000;
  const std::uint64_t seed = 7;

  const auto estimate = [&](auto&& solve) {
    double mean = 0.0;
    for (std::size_t i = 0; i < paths; ++i) {
      const auto records = solve(i);
      mean += realized_covariation(records[0], records[1]);
    }
    return mean / static_cast<double>(paths);
  };

  const double pair_target = 1.0 * (-0.5) + 1.0 * 2.0;           // coupled executors
  const double exploratory_target = std::sqrt((1.0 + 1.0) * (0.25 + 4.0));  // averaged dynamics
  std::printf("%-24s %10s %10s\n", "dynamics", "estimate", "target");

  for (const std::size_t mesh : {8u, 64u}) {
    SolverConfig config(Partition::uniform(scenario.horizon, mesh));
    config.refine = 8;
    config.u_rule = scenario.u_rule;
    const double est = estimate([&](std::size_t i) {
      return solve_grid_sampling(scenario.model, scenario.policies, config, seed, i);
    });
    std::printf("grid sampling, n=%-8zu %10.4f %10.4f\n", mesh, est, pair_target);
  }

  SolverConfig config(Partition::uniform(scenario.horizon, 64));
  config.refine = 8;
  config.u_rule = scenario.u_rule;
  const auto table = prepare_limit_coefficients(scenario.model, scenario.policies, config);
  const double limit_est = estimate([&](std::size_t i) {
    return solve_limit_joint(scenario.model, scenario.policies, config, seed, i, &table);
  });
  std::printf("%-24s %10.4f %10.4f\n", "limit dynamics", limit_est, pair_target);

  const auto expl = prepare_exploratory_coefficients(scenario.model, scenario.policies, config);
  const double expl_est = estimate([&](std::size_t i) {
    return solve_exploratory_joint(scenario.model, scenario.policies, config, seed, i, &expl);
  });
  std::printf("%-24s %10.4f %10.4f\n", "averaged dynamics", expl_est, exploratory_target);
  return 0;
}
