#pragma once

/**
 * Policy evaluation on the sampling grid:
 *  - ValueModel:          linear-in-parameters value surface pinned to the
 *                         terminal payoff,
 *  - td0_episode_update:  the TD(0) increment discretized on the
 *                         randomization partition,
 *  - run_td0:             episodic driver with a Robbins-Monro step schedule,
 *  - martingale_loss:     bucketed conditional-mean diagnostic that vanishes
 *                         exactly when the candidate surface is the value
 *                         function of the evaluated policy.
 *
 * The continuous-time update this discretizes is not an operation here: it
 * involves the unobservable averaged state and exists only as the limit the
 * partition update approaches as the mesh vanishes.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/model.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/sde.hpp"

namespace gridrl {

/**
 * Linear-in-parameters value surface
 *
 *   J(t, x) = g(x) + sum_l theta_l * phi_l(t, x)
 *
 * with terminal payoff g and basis maps phi_l that vanish identically at the
 * horizon, so J(T, .) = g holds for every parameter vector by construction
 * rather than by training. The gradient in theta is simply the basis.
 */
struct ValueModel {
  std::function<double(const Vec&)> terminal;
  std::vector<std::function<double(double, const Vec&)>> basis;
  Vec theta;

  [[nodiscard]] double value(double t, const Vec& x) const {
    double out = terminal(x);
    for (std::size_t l = 0; l < basis.size(); ++l) out += theta[l] * basis[l](t, x);
    return out;
  }

  /** Gradient of the value in theta: the basis evaluated at (t, x). */
  [[nodiscard]] Vec features(double t, const Vec& x) const {
    Vec out(basis.size());
    for (std::size_t l = 0; l < basis.size(); ++l) out[l] = basis[l](t, x);
    return out;
  }

  /**
   * Structural checks plus the terminal pin, probed pointwise: every basis
   * map must be exactly zero at the horizon on the probe states (a small
   * default grid of constant vectors when none are supplied).
   */
  void validate(double horizon, std::size_t state_dim, std::vector<Vec> probe_states = {}) const {
    if (!terminal) throw ConfigError("ValueModel: terminal payoff required");
    if (basis.empty()) throw ConfigError("ValueModel: at least one basis map required");
    for (const auto& phi : basis)
      if (!phi) throw ConfigError("ValueModel: basis map is empty");
    if (theta.size() != basis.size())
      throw ConfigError("ValueModel: one parameter per basis map required");
    if (probe_states.empty())
      for (const double c : {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 5.0, -5.0})
        probe_states.emplace_back(state_dim, c);
    for (const auto& x : probe_states) {
      if (x.size() != state_dim)
        throw ConfigError("ValueModel: probe state has wrong dimension");
      if (!std::isfinite(terminal(x)))
        throw NumericalError("ValueModel: terminal payoff is not finite");
      for (const auto& phi : basis)
        if (phi(horizon, x) != 0.0)
          throw ConfigError("ValueModel: basis must vanish at the horizon");
    }
  }
};

/**
 * TD(0) run parameters. The step schedule alpha_k = alpha0 / (1 + k / k0) is
 * positive with divergent sum and convergent square sum, the standard
 * stochastic-approximation conditions; alpha0 = 0 freezes learning, which is
 * occasionally useful as a diagnostic.
 */
struct TDConfig {
  double temperature = 0.1;  // entropy weight in the running cost, >= 0
  double alpha0 = 0.1;       // initial step size
  double k0 = 500.0;         // episodes until the step size halves
  std::size_t n_episodes = 20000;
  SolverConfig solver;  // sampling partition, simulation refinement, control rule

  TDConfig() = default;
  explicit TDConfig(SolverConfig solver_config) : solver(std::move(solver_config)) {}

  [[nodiscard]] double step_size(std::size_t episode) const {
    return alpha0 / (1.0 + static_cast<double>(episode) / k0);
  }

  void validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("TDConfig: temperature must be >= 0");
    if (!(alpha0 >= 0.0)) throw ConfigError("TDConfig: alpha0 must be >= 0");
    if (!(k0 > 0.0)) throw ConfigError("TDConfig: k0 must be > 0");
    if (n_episodes == 0) throw ConfigError("TDConfig: need at least one episode");
    if (config_has_empty_partition()) throw ConfigError("TDConfig: sampling partition is empty");
    if (solver.refine == 0) throw ConfigError("TDConfig: refine must be >= 1");
  }

 private:
  [[nodiscard]] bool config_has_empty_partition() const { return solver.partition.intervals() == 0; }
};

/**
 * One-episode parameter increment of the grid-discretized TD(0) step,
 *
 *   alpha * sum_i gradJ(t_{i-1}, X_{t_{i-1}}) *
 *       [ J(t_i, X_{t_i}) - J(t_{i-1}, X_{t_{i-1}})
 *         + lambda (t_i - t_{i-1}) log hdot(t_{i-1}, X_{t_{i-1}}, y_i) ],
 *
 * where y_i is the action the policy executes from the episode's
 * randomization draw on interval i and hdot is its relaxed density. The sum
 * runs over the sampling partition; the path may be recorded on any
 * refinement of it. alpha is the schedule value at `episode`.
 */
inline Vec td0_episode_update(const ValueModel& value, const PathRecord& path,
                              const RandomizationDraw& draw, const RandomizedPolicy& policy,
                              const TDConfig& config, std::size_t episode = 0) {
  config.validate();
  policy.validate();
  if (!policy.has_density())
    throw ConfigError("td0_episode_update: policy must declare a relaxed density");
  if (value.theta.size() != value.basis.size())
    throw ConfigError("td0_episode_update: one parameter per basis map required");
  const Partition& grid = config.solver.partition;
  if (draw.partition.t != grid.t)
    throw ConfigError("td0_episode_update: draw and config use different partitions");

  const double alpha = config.step_size(episode);
  Vec increment(value.basis.size(), 0.0);
  double j_prev = value.value(grid.t.front(), path.state_at(grid.t.front()));
  for (std::size_t i = 1; i < grid.t.size(); ++i) {
    const double t0 = grid.t[i - 1];
    const double t1 = grid.t[i];
    const Vec& x0 = path.state_at(t0);
    const Vec& x1 = path.state_at(t1);
    const Vec action = policy.h(t0, x0, draw.value_on_interval(i));
    const double density = policy.relaxed_density(t0, x0, action);
    if (!(density > 0.0) || !std::isfinite(density)) {
      std::string where = "td0_episode_update: relaxed density vanished at the executed action "
                          "(interval " +
                          std::to_string(i) + ", action = [";
      for (std::size_t k = 0; k < action.size(); ++k)
        where += (k ? ", " : "") + std::to_string(action[k]);
      throw NumericalError(where + "])");
    }
    const double j_next = value.value(t1, x1);
    const double td_error =
        j_next - j_prev + config.temperature * (t1 - t0) * std::log(density);
    const Vec grad = value.features(t0, x0);
    for (std::size_t l = 0; l < grad.size(); ++l) increment[l] += alpha * td_error * grad[l];
    j_prev = j_next;
  }
  return increment;
}

/** Episode-indexed parameter trajectory of a TD(0) run. */
struct TDResult {
  Vec theta;           // parameters after the last episode
  Vec theta_averaged;  // mean of the last min(100, n_episodes) iterates
  std::vector<Vec> trajectory;
  std::vector<double> increment_norms;
};

/**
 * Offline TD(0): repeatedly simulate a fresh grid-sampling episode under the
 * policy and apply the discretized update. Episodes are sequential (the
 * parameter vector is a running state); episode k draws its randomization,
 * Brownian and jump streams at path index k under the master seed, so a run
 * is reproducible and distinct master seeds give independent runs.
 *
 * `theta_averaged`, the mean of the final iterates, is the recommended
 * estimate; the last raw iterate keeps the full schedule noise.
 */
inline TDResult run_td0(const JumpDiffusionModel& model, const RandomizedPolicy& policy,
                        ValueModel value, const TDConfig& config, std::uint64_t master_seed) {
  config.validate();
  model.validate(config.solver.partition.horizon());
  policy.validate();
  if (!policy.has_density())
    throw ConfigError("run_td0: policy must declare a relaxed density");
  value.validate(config.solver.partition.horizon(), model.dims.m);

  const std::vector<RandomizedPolicy> policies{policy};
  TDResult result;
  result.trajectory.reserve(config.n_episodes);
  result.increment_norms.reserve(config.n_episodes);
  for (std::size_t k = 0; k < config.n_episodes; ++k) {
    const auto records = solve_grid_sampling(model, policies, config.solver, master_seed, k);
    const auto draw = sample_grid_randomization(config.solver.partition, model.dims.d,
                                                SeedSpec{master_seed, "xi", k});
    const Vec increment = td0_episode_update(value, records.front(), draw, policy, config, k);
    for (std::size_t l = 0; l < value.theta.size(); ++l) value.theta[l] += increment[l];
    if (norm_inf(value.theta) > 1e8)
      throw DivergenceError("run_td0: parameters diverged at episode " + std::to_string(k));
    result.trajectory.push_back(value.theta);
    result.increment_norms.push_back(norm2(increment));
  }
  result.theta = value.theta;
  const std::size_t window = std::min<std::size_t>(100, result.trajectory.size());
  result.theta_averaged.assign(value.theta.size(), 0.0);
  for (std::size_t k = result.trajectory.size() - window; k < result.trajectory.size(); ++k)
    for (std::size_t l = 0; l < value.theta.size(); ++l)
      result.theta_averaged[l] += result.trajectory[k][l];
  for (double& v : result.theta_averaged) v /= static_cast<double>(window);
  return result;
}

/** Outcome of the bucketed martingale diagnostic. */
struct MartingaleLossResult {
  double loss = 0.0;       // bias-corrected sum of squared conditional means
  double std_error = 0.0;  // delta-method standard error of `loss`
  std::size_t buckets_used = 0;
  bool widened = false;  // fewer buckets than requested fit the path count
};

/**
 * Martingale diagnostic for a candidate value surface J along limit-dynamics
 * paths: when J is the value function of the evaluated policy,
 *
 *   M_t = J(t, X_t) - temperature * integral over [0, t] of the policy's
 *         entropy rate
 *
 * is a martingale, so every conditional mean of its increments vanishes. At
 * each reporting time the paths are split into equal-mass buckets by their
 * first state coordinate (a coarsening of the past, so the null is exact);
 * the statistic sums bias-corrected squared bucket means of the M increment
 * over buckets and reporting steps. Its expectation is zero under the
 * martingale property and positive otherwise; `std_error` is a delta-method
 * estimate. The entropy integral uses the policy's closed form when declared,
 * a quadrature otherwise, with a left-endpoint rule in time.
 *
 * Reporting times must lie on the simulation grid. When fewer than
 * 2 * n_buckets paths are available the bucketing widens (and says so in the
 * result) rather than erroring.
 */
inline MartingaleLossResult martingale_loss(const ValueModel& value,
                                            const JumpDiffusionModel& model,
                                            const RandomizedPolicy& policy, const TDConfig& config,
                                            std::size_t n_paths,
                                            const std::vector<double>& report_times,
                                            std::uint64_t master_seed,
                                            std::size_t n_buckets = 16) {
  config.validate();
  model.validate(config.solver.partition.horizon());
  policy.validate();
  value.validate(config.solver.partition.horizon(), model.dims.m);
  if (n_paths < 2) throw ConfigError("martingale_loss: need at least two paths");
  if (n_buckets == 0) throw ConfigError("martingale_loss: need at least one bucket");
  if (report_times.size() < 2)
    throw ConfigError("martingale_loss: need at least two reporting times");
  for (std::size_t j = 0; j + 1 < report_times.size(); ++j)
    if (!(report_times[j] < report_times[j + 1]))
      throw ConfigError("martingale_loss: reporting times must be strictly increasing");

  const std::vector<RandomizedPolicy> policies{policy};
  LimitCoefficientTable table;
  const LimitCoefficientTable* table_ptr = nullptr;
  if (model.state_independent_coeffs) {
    table = prepare_limit_coefficients(model, policies, config.solver);
    table_ptr = &table;
  }

  // Per path: M at each reporting time, with the entropy integral accumulated
  // by left-endpoint steps between reporting times.
  const std::size_t n_report = report_times.size();
  std::vector<Vec> m_values(n_report, Vec(n_paths));
  std::vector<Vec> bucket_keys(n_report, Vec(n_paths));
  for (std::size_t p = 0; p < n_paths; ++p) {
    const auto record = solve_limit_joint(model, policies, config.solver, master_seed, p,
                                          table_ptr)
                            .front();
    double entropy_integral = 0.0;
    for (std::size_t j = 0; j < n_report; ++j) {
      const Vec& x = record.state_at(report_times[j]);
      m_values[j][p] = value.value(report_times[j], x) - config.temperature * entropy_integral;
      bucket_keys[j][p] = x.front();
      if (config.temperature != 0.0 && j + 1 < n_report)
        entropy_integral += entropy(policy, report_times[j], x) * (report_times[j + 1] - report_times[j]);
    }
  }

  MartingaleLossResult result;
  result.buckets_used = std::min<std::size_t>(n_buckets, n_paths / 2);
  if (result.buckets_used == 0) result.buckets_used = 1;
  result.widened = result.buckets_used < n_buckets;
  const std::size_t n_b = result.buckets_used;

  double loss = 0.0, variance = 0.0;
  std::vector<std::size_t> order(n_paths);
  for (std::size_t j = 0; j + 1 < n_report; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return bucket_keys[j][a] < bucket_keys[j][b];
    });
    for (std::size_t b = 0; b < n_b; ++b) {
      const std::size_t lo = b * n_paths / n_b;
      const std::size_t hi = (b + 1) * n_paths / n_b;
      const auto count = static_cast<double>(hi - lo);
      double mean = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        const std::size_t p = order[r];
        mean += m_values[j + 1][p] - m_values[j][p];
      }
      mean /= count;
      double var = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        const std::size_t p = order[r];
        var += sq(m_values[j + 1][p] - m_values[j][p] - mean);
      }
      var /= std::max(1.0, count - 1.0);
      // mean^2 - var/count is unbiased for the squared conditional mean; its
      // variance below is the normal-approximation delta method.
      const double weight = 1.0 / static_cast<double>(n_b);
      loss += weight * (mean * mean - var / count);
      variance += sq(weight) * (4.0 * mean * mean * var / count + 2.0 * var * var / sq(count));
    }
  }
  result.loss = loss;
  result.std_error = std::sqrt(variance);
  return result;
}

}  // namespace gridrl
