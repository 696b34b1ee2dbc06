#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/scenarios.hpp"
#include "gridrl/td.hpp"

using namespace gridrl;

namespace {

/** The benchmark value surface: terminal x, one (T - t) basis map. */
ValueModel bench_value_model(double horizon, double theta0 = 0.0) {
  ValueModel value;
  value.terminal = [](const Vec& x) { return x[0]; };
  value.basis = {[horizon](double t, const Vec&) { return horizon - t; }};
  value.theta = Vec{theta0};
  return value;
}

TDConfig bench_config(const Scenario& scenario, std::size_t refine) {
  TDConfig config(SolverConfig(Partition::uniform(scenario.horizon, scenario.td_partition_n)));
  config.solver.refine = refine;
  config.temperature = scenario.td_temperature;
  config.alpha0 = scenario.td_alpha0;
  config.k0 = scenario.td_k0;
  config.n_episodes = scenario.td_episodes;
  return config;
}

/** A model whose every coefficient is zero: paths sit at x0 forever. */
JumpDiffusionModel frozen_model(double x0) {
  JumpDiffusionModel model;
  model.dims = Dimensions{1, 1, 1, 1};
  model.x0 = Vec{x0};
  model.b = [](double, const Vec&, const Vec&) { return Vec{0.0}; };
  model.a = [](double, const Vec&, const Vec&) { return Mat(1, 1); };
  model.state_independent_coeffs = true;
  return model;
}

}  // namespace

TEST_CASE("value surface equals the terminal payoff at the horizon for every parameter",
          "[td]") {
  auto value = bench_value_model(1.0);
  for (const double theta : {-3.0, 0.0, 0.7, 100.0}) {
    value.theta[0] = theta;
    for (const double x : {-2.0, -0.3, 0.0, 1.7, 40.0}) {
      REQUIRE(value.value(1.0, Vec{x}) == x);
      REQUIRE(value.value(0.25, Vec{x}) == x + theta * 0.75);
    }
  }
  REQUIRE(value.features(0.4, Vec{9.0}) == Vec{0.6});
  REQUIRE_NOTHROW(value.validate(1.0, 1));
}

TEST_CASE("value model validation rejects broken architectures", "[td]") {
  const double horizon = 1.0;

  auto no_terminal = bench_value_model(horizon);
  no_terminal.terminal = nullptr;
  REQUIRE_THROWS_AS(no_terminal.validate(horizon, 1), ConfigError);

  auto no_basis = bench_value_model(horizon);
  no_basis.basis.clear();
  no_basis.theta.clear();
  REQUIRE_THROWS_AS(no_basis.validate(horizon, 1), ConfigError);

  auto mismatched = bench_value_model(horizon);
  mismatched.theta = Vec{0.0, 1.0};
  REQUIRE_THROWS_AS(mismatched.validate(horizon, 1), ConfigError);

  auto lingering = bench_value_model(horizon);
  lingering.basis = {[](double, const Vec&) { return 1.0; }};  // does not vanish at T
  REQUIRE_THROWS_AS(lingering.validate(horizon, 1), ConfigError);

  auto exploding = bench_value_model(horizon);
  exploding.terminal = [](const Vec& x) { return 1.0 / x[0]; };  // infinite at the origin probe
  REQUIRE_THROWS_AS(exploding.validate(horizon, 1), NumericalError);
}

TEST_CASE("step schedule decays from alpha0 with half-life k0", "[td]") {
  TDConfig config(SolverConfig(Partition::uniform(1.0, 4)));
  config.alpha0 = 0.0323;
  config.k0 = 60.0;
  REQUIRE(config.step_size(0) == 0.0323);
  REQUIRE(std::abs(config.step_size(60) - 0.0323 / 2.0) < 1e-15);
  for (const std::size_t k : {0u, 1u, 10u, 100u, 1000u})
    REQUIRE(config.step_size(k + 1) < config.step_size(k));

  auto bad = config;
  bad.temperature = -0.1;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.alpha0 = -1.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.k0 = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.n_episodes = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = config;
  bad.solver.refine = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero step size gives a zero increment", "[td]") {
  const auto scenario = make_scenario("td0_bench");
  auto config = bench_config(scenario, 2);
  config.alpha0 = 0.0;
  const auto value = bench_value_model(scenario.horizon);
  const auto records = solve_grid_sampling(scenario.model, scenario.policies, config.solver, 11);
  const auto draw = sample_grid_randomization(config.solver.partition, scenario.model.dims.d,
                                              SeedSpec{11, "xi", 0});
  const Vec increment =
      td0_episode_update(value, records.front(), draw, scenario.policies[0], config);
  REQUIRE(increment == Vec{0.0});
}

TEST_CASE("single-interval frozen path reproduces the hand-expanded update", "[td]") {
  const auto model = frozen_model(0.4);
  const auto policy = make_gaussian_executor("p", 0.3, 1.5);

  ValueModel value;
  value.terminal = [](const Vec& x) { return x[0] * x[0]; };
  value.basis = {[](double t, const Vec& x) { return (1.0 - t) * std::cos(x[0]); }};
  value.theta = Vec{0.8};

  TDConfig config(SolverConfig(Partition::uniform(1.0, 1)));
  config.solver.refine = 3;
  config.temperature = 0.25;
  config.alpha0 = 0.125;
  config.k0 = 10.0;
  config.n_episodes = 1;

  const std::uint64_t seed = 21;
  const auto records = solve_grid_sampling(model, {policy}, config.solver, seed);
  const auto draw = sample_grid_randomization(config.solver.partition, 1, SeedSpec{seed, "xi", 0});
  const Vec increment = td0_episode_update(value, records.front(), draw, policy, config);

  // All coefficients vanish, so the state never moves and the one-term sum
  // can be written out directly.
  const Vec x0{0.4};
  REQUIRE(records.front().terminal_state() == x0);
  const Vec action = policy.h(0.0, x0, draw.value_on_interval(1));
  const double td_error = value.value(1.0, x0) - value.value(0.0, x0) +
                          0.25 * 1.0 * std::log(policy.relaxed_density(0.0, x0, action));
  const double expected = 0.125 * td_error * value.features(0.0, x0)[0];
  REQUIRE(increment[0] == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("episode increments are centered when the surface is the exact value function",
          "[td]") {
  // Temperature zero and J(t, x) = x on the driftless benchmark: the TD error
  // telescopes martingale increments, so the update has zero mean.
  const auto scenario = make_scenario("td0_bench", {{"lambda", 0.0}});
  auto config = bench_config(scenario, 1);
  config.alpha0 = 1.0;
  config.k0 = 1e12;  // effectively constant step size
  const auto value = bench_value_model(scenario.horizon);

  const std::uint64_t seed = 2025;
  const std::size_t n_episodes = 10000;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_episodes; ++k) {
    const auto records = solve_grid_sampling(scenario.model, scenario.policies, config.solver,
                                             seed, k);
    const auto draw = sample_grid_randomization(config.solver.partition, 1, SeedSpec{seed, "xi", k});
    const Vec increment =
        td0_episode_update(value, records.front(), draw, scenario.policies[0], config);
    const double delta = increment[0] - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (increment[0] - mean);
  }
  const double se = std::sqrt(m2 / static_cast<double>(n_episodes - 1) /
                              static_cast<double>(n_episodes));
  REQUIRE(se > 0.0);
  REQUIRE(std::abs(mean) < 4.0 * se);
}

TEST_CASE("TD(0) reaches the closed-form fixed point on the benchmark", "[td]") {
  const auto scenario = make_scenario("td0_bench");
  const auto config = bench_config(scenario, 4);
  const auto value = bench_value_model(scenario.horizon);

  const auto result = run_td0(scenario.model, scenario.policies[0], value, config, 1);
  REQUIRE(result.trajectory.size() == config.n_episodes);
  REQUIRE(result.increment_norms.size() == config.n_episodes);
  REQUIRE(result.theta == result.trajectory.back());

  // Tail average recomputed from the trajectory.
  double tail = 0.0;
  for (std::size_t k = config.n_episodes - 100; k < config.n_episodes; ++k)
    tail += result.trajectory[k][0];
  tail /= 100.0;
  REQUIRE(result.theta_averaged[0] == Catch::Approx(tail).margin(1e-15));

  // theta* = -lambda/2 * ln(2 pi e sigma^2); the tail estimate carries a
  // standard deviation of about 0.008 at this episode budget (the update's
  // information floor), so the 0.01 gate is a seed-verified regression pin.
  REQUIRE(scenario.td_theta_star == Catch::Approx(-0.1418939).margin(5e-7));
  REQUIRE(std::abs(result.theta_averaged[0] - scenario.td_theta_star) < 0.01);
}

TEST_CASE("zero temperature drives the basis coefficient to zero", "[td]") {
  const auto scenario = make_scenario("td0_bench", {{"lambda", 0.0}});
  const auto config = bench_config(scenario, 4);
  const auto value = bench_value_model(scenario.horizon);
  const auto result = run_td0(scenario.model, scenario.policies[0], value, config, 1);
  // J(t, x) = x is exact here, so theta* = 0; same seed-verified caveat as
  // above (estimator sd ~ 0.008 at 2e4 episodes).
  REQUIRE(std::abs(result.theta_averaged[0]) < 0.005);
}

TEST_CASE("wider executors shift the fixed point by their entropy", "[td]") {
  const auto scenario = make_scenario("td0_bench", {{"sigma", 2.0}});
  const auto config = bench_config(scenario, 4);
  const auto value = bench_value_model(scenario.horizon);
  const auto result = run_td0(scenario.model, scenario.policies[0], value, config, 1);
  // theta* = -0.1 * 0.5 ln(8 pi e) = -0.2112086. The estimator noise scales
  // with E[y^2] = sigma^2, sd ~ 0.016 here, so this too is a seed-verified
  // regression pin rather than a distribution-free bound.
  REQUIRE(scenario.td_theta_star == Catch::Approx(-0.2112086).margin(5e-7));
  REQUIRE(std::abs(result.theta_averaged[0] - scenario.td_theta_star) < 0.01);
}

TEST_CASE("scaling the basis by c and the step by 1/c^2 leaves predictions unchanged",
          "[td]") {
  const auto scenario = make_scenario("td0_bench");
  auto config = bench_config(scenario, 1);
  config.n_episodes = 300;
  const double horizon = scenario.horizon;

  const auto plain = bench_value_model(horizon);
  ValueModel scaled = plain;
  scaled.basis = {[horizon](double t, const Vec&) { return 2.0 * (horizon - t); }};
  auto scaled_config = config;
  scaled_config.alpha0 = config.alpha0 / 4.0;

  const auto r1 = run_td0(scenario.model, scenario.policies[0], plain, config, 9);
  const auto r2 = run_td0(scenario.model, scenario.policies[0], scaled, scaled_config, 9);
  for (const double t : {0.0, 0.31, 0.75}) {
    const double p1 = r1.theta_averaged[0] * (horizon - t);
    const double p2 = r2.theta_averaged[0] * 2.0 * (horizon - t);
    REQUIRE(p2 == Catch::Approx(p1).margin(1e-13));
  }
}

TEST_CASE("oversized steps trip the divergence guard", "[td]") {
  const auto scenario = make_scenario("td0_bench");
  auto config = bench_config(scenario, 1);
  config.alpha0 = 1000.0;
  config.n_episodes = 500;
  const auto value = bench_value_model(scenario.horizon);
  try {
    run_td0(scenario.model, scenario.policies[0], value, config, 1);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& err) {
    REQUIRE(std::string(err.what()).find("diverged at episode") != std::string::npos);
  }
}

TEST_CASE("a vanishing density at the executed action is reported with its interval", "[td]") {
  // The declared density is wrong on half the support, so some executed
  // action eventually lands where it vanishes.
  RandomizedPolicy lying;
  lying.id = "lying";
  lying.action_dim = 1;
  lying.h = [](double, const Vec&, const Vec& u) { return Vec{2.0 * u[0] - 1.0}; };
  lying.relaxed_density = [](double, const Vec&, const Vec& y) {
    return y[0] >= 0.0 ? 0.5 : 0.0;
  };
  lying.support_lo = Vec{-1.0};
  lying.support_hi = Vec{1.0};

  const auto scenario = make_scenario("td0_bench");
  auto config = bench_config(scenario, 1);
  config.n_episodes = 4;
  const auto value = bench_value_model(scenario.horizon);
  try {
    run_td0(scenario.model, lying, value, config, 3);
    FAIL("expected a density error");
  } catch (const NumericalError& err) {
    const std::string what = err.what();
    REQUIRE(what.find("interval") != std::string::npos);
    REQUIRE(what.find("action") != std::string::npos);
  }
}

TEST_CASE("updates demand a density and a matching draw partition", "[td]") {
  const auto scenario = make_scenario("td0_bench");
  const auto config = bench_config(scenario, 1);
  const auto value = bench_value_model(scenario.horizon);

  RandomizedPolicy bare = scenario.policies[0];
  bare.relaxed_density = nullptr;
  bare.support_lo.clear();
  bare.support_hi.clear();
  REQUIRE_THROWS_AS(run_td0(scenario.model, bare, value, config, 1), ConfigError);

  const auto records = solve_grid_sampling(scenario.model, scenario.policies, config.solver, 1);
  const auto foreign = sample_grid_randomization(Partition::uniform(scenario.horizon, 7), 1,
                                                 SeedSpec{1, "xi", 0});
  REQUIRE_THROWS_AS(
      td0_episode_update(value, records.front(), foreign, scenario.policies[0], config),
      ConfigError);
}

TEST_CASE("martingale loss is exactly zero on a frozen model", "[td]") {
  const auto model = frozen_model(1.3);
  const auto policy = make_gaussian_executor("p", 0.0, 1.0);
  ValueModel value;
  value.terminal = [](const Vec& x) { return x[0] * x[0]; };
  value.basis = {[](double t, const Vec&) { return 1.0 - t; }};
  value.theta = Vec{0.0};

  TDConfig config(SolverConfig(Partition::uniform(1.0, 8)));
  config.solver.refine = 2;
  config.solver.u_rule = graded_gauss_unit_cube();
  config.temperature = 0.0;

  const auto result = martingale_loss(value, model, policy, config, 64,
                                      config.solver.partition.t, 5);
  REQUIRE(result.loss == 0.0);
  REQUIRE(result.std_error == 0.0);
  REQUIRE(result.buckets_used == 16);
  REQUIRE_FALSE(result.widened);
}

TEST_CASE("martingale loss widens its buckets when paths are scarce", "[td]") {
  const auto model = frozen_model(0.0);
  const auto policy = make_gaussian_executor("p", 0.0, 1.0);
  ValueModel value;
  value.terminal = [](const Vec&) { return 0.0; };
  value.basis = {[](double t, const Vec&) { return 1.0 - t; }};
  value.theta = Vec{0.0};
  TDConfig config(SolverConfig(Partition::uniform(1.0, 4)));
  config.solver.u_rule = graded_gauss_unit_cube();
  config.temperature = 0.0;

  const auto result = martingale_loss(value, model, policy, config, 8, config.solver.partition.t,
                                      5);
  REQUIRE(result.buckets_used == 4);
  REQUIRE(result.widened);
  REQUIRE_THROWS_AS(
      martingale_loss(value, model, policy, config, 1, config.solver.partition.t, 5),
      ConfigError);
  REQUIRE_THROWS_AS(
      martingale_loss(value, model, policy, config, 8, {0.5, 0.5}, 5), ConfigError);
  REQUIRE_THROWS_AS(
      martingale_loss(value, model, policy, config, 8, {0.0, 0.33}, 5), ConfigError);
}

TEST_CASE("martingale loss separates the value function from a perturbed surface", "[td]") {
  const auto scenario = make_scenario("td0_bench");
  auto config = bench_config(scenario, 2);
  config.solver.u_rule = graded_gauss_unit_cube();

  const auto at_star = bench_value_model(scenario.horizon, scenario.td_theta_star);
  const auto perturbed = bench_value_model(scenario.horizon, scenario.td_theta_star + 1.0);

  const std::size_t n_paths = 4000;
  const auto& report = config.solver.partition.t;
  const auto null_result =
      martingale_loss(at_star, scenario.model, scenario.policies[0], config, n_paths, report, 1234);
  const auto off_result = martingale_loss(perturbed, scenario.model, scenario.policies[0], config,
                                          n_paths, report, 1234);

  REQUIRE(null_result.std_error > 0.0);
  REQUIRE(std::abs(null_result.loss) < 4.0 * null_result.std_error);

  // The perturbation adds a conditional drift of dt per reporting step, so
  // the loss concentrates near sum dt^2 = 1/32, far above the null noise.
  REQUIRE(off_result.loss > 0.02);
  const double pooled =
      std::sqrt(sq(null_result.std_error) + sq(off_result.std_error));
  REQUIRE(off_result.loss > null_result.loss + 10.0 * pooled);
}
