#pragma once

/**
 * Path solvers:
 *  - solve_classical:      Euler for the jump-diffusion under a deterministic
 *                          feedback control.
 *  - solve_grid_sampling:  K systems under grid-randomized policies, sharing
 *                          one Brownian motion, one jump stream and one
 *                          randomization draw (common noise).
 *  - solve_limit_joint:    K systems under the joint limit dynamics: jointly
 *                          Gaussian diffusion increments with the
 *                          policy-averaged effective covariance, shared jump
 *                          events carrying i.i.d. uniform marks, and
 *                          policy-averaged drift and small-jump compensator.
 *  - solve_exploratory:    the scalar averaged dynamics with drift
 *                          integral b(t,x,h(u)) du and diffusion
 *                          sqrt(integral a^2(t,x,h(u)) du); no jumps.
 *
 * Common conventions: the simulation grid is the control partition refined
 * `refine`-fold with every sampled jump time inserted as a grid point;
 * coefficients are evaluated at step starts with the pre-jump state; the
 * action on a step uses the draw of the coarse interval containing the step
 * end; a state exceeding the blow-up guard raises a divergence error naming
 * the step.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/integrate.hpp"
#include "gridrl/model.hpp"
#include "gridrl/noise.hpp"
#include "gridrl/quadrature.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/** A simulated path: states recorded at every grid time (post-jump at jump times). */
struct PathRecord {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<double> jump_times;  // one entry per applied jump, in time order
  std::size_t jumps_applied = 0;
  std::string scheme;
  std::string policy_id;

  [[nodiscard]] std::size_t index_of_time(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end() || *it != t)
      throw ConfigError("PathRecord: time " + std::to_string(t) + " is not a recorded grid point");
    return static_cast<std::size_t>(it - times.begin());
  }

  [[nodiscard]] const Vec& state_at(double t) const { return states[index_of_time(t)]; }

  [[nodiscard]] const Vec& terminal_state() const { return states.back(); }
};

/** Shared solver configuration. */
struct SolverConfig {
  Partition partition;          // control / reporting partition
  std::size_t refine = 32;      // Euler substeps per control interval
  UnitCubeRule u_rule;          // control-space rule (limit / exploratory)
  double blowup_guard = 1e12;

  SolverConfig() : partition(Partition::uniform(1.0, 1)) {}
  explicit SolverConfig(Partition p) : partition(std::move(p)) {}
};

namespace detail {

/** Merge sorted event times into a grid; exact duplicates collapse. */
inline Partition insert_event_times(const Partition& grid, const std::vector<JumpEvent>& events) {
  if (events.empty()) return grid;
  std::vector<double> pts = grid.t;
  pts.reserve(pts.size() + events.size());
  for (const auto& event : events) pts.push_back(event.t);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return Partition(std::move(pts));
}

inline void check_blowup(const Vec& x, double guard, std::size_t step, double t,
                         const char* scheme) {
  if (!all_finite(x) || norm_inf(x) > guard)
    throw DivergenceError(std::string(scheme) + ": state exceeded the blow-up guard at step " +
                          std::to_string(step) + ", t=" + std::to_string(t));
}

/**
 * Euler core for one system. The action provider is called at every step
 * start (and at jump times with the pre-jump state); the compensator is the
 * per-unit-time drift correction for compensated small jumps.
 */
template <typename ActionFn>
PathRecord euler_single(const JumpDiffusionModel& model, const SolverConfig& config,
                        const Partition& merged, const BrownianPanel& brownian,
                        const std::vector<JumpEvent>& events, ActionFn&& action,
                        const char* scheme) {
  const std::size_t m = model.dims.m;
  PathRecord record;
  record.scheme = scheme;
  record.times = merged.t;
  record.states.reserve(merged.t.size());
  Vec x = model.x0;
  record.states.push_back(x);

  const bool compensate = model.levy.has_jumps() && model.levy.truncation_radius > 0.0;
  std::size_t next_event = 0;
  for (std::size_t k = 0; k < merged.intervals(); ++k) {
    const double s = merged.t[k];
    const double e = merged.t[k + 1];
    const double dt = e - s;
    const Vec y = action(s, x, e);
    const auto [drift, diffusion] = eval_coeffs(model, s, x, y);
    Vec next = x;
    for (std::size_t r = 0; r < m; ++r) {
      double incr = drift[r] * dt;
      for (std::size_t l = 0; l < model.dims.p; ++l)
        incr += diffusion(r, l) * brownian.dB[k][l];
      next[r] += incr;
    }
    if (compensate) {
      for (std::size_t r = 0; r < m; ++r) {
        const double comp = model.levy.integrate_z(
            s, [&](const Vec& z) { return model.gamma(s, x, y, z)[r]; }, JumpRegion::small);
        next[r] -= comp * dt;
      }
    }
    while (next_event < events.size() && events[next_event].t == e) {
      const Vec y_jump = action(e, next, e);
      const Vec jump = model.gamma(e, next, y_jump, events[next_event].z);
      if (jump.size() != m) throw ConfigError(std::string(scheme) + ": gamma output has wrong dimension");
      for (std::size_t r = 0; r < m; ++r) next[r] += jump[r];
      record.jumps_applied += 1;
      record.jump_times.push_back(e);
      next_event += 1;
    }
    check_blowup(next, config.blowup_guard, k + 1, e, scheme);
    x = std::move(next);
    record.states.push_back(x);
  }
  return record;
}

}  // namespace detail

/**
 * Euler path under a deterministic feedback control y = feedback(t, x).
 * Jump events are sampled from the model's measure; small jumps are
 * compensated.
 */
inline PathRecord solve_classical(const JumpDiffusionModel& model, const FeedbackPolicy& feedback,
                                  const SolverConfig& config, std::uint64_t master_seed,
                                  std::size_t path_index = 0) {
  if (!feedback) throw ConfigError("solve_classical: feedback control required");
  model.validate(config.partition.horizon());
  if (config.refine == 0) throw ConfigError("solve_classical: refine must be >= 1");
  const auto fine = config.partition.refined(config.refine);
  std::vector<JumpEvent> events;
  if (model.levy.has_jumps()) {
    auto jump_stream = derive_stream(SeedSpec{master_seed, "jump", path_index});
    events = sample_poisson_measure(model.levy, fine.horizon(), jump_stream);
  }
  const auto merged = detail::insert_event_times(fine, events);
  const auto brownian =
      sample_brownian(merged, model.dims.p, SeedSpec{master_seed, "bm", path_index});
  auto record = detail::euler_single(
      model, config, merged, brownian, events,
      [&](double s, const Vec& x, double) { return feedback(s, x); }, "classical");
  record.policy_id = "feedback";
  return record;
}

/**
 * K systems under grid-randomized policies with common noise: one
 * randomization draw, one Brownian motion and one jump stream drive all K
 * systems; system k applies policy k to the shared draw.
 */
inline std::vector<PathRecord> solve_grid_sampling(const JumpDiffusionModel& model,
                                                   const std::vector<RandomizedPolicy>& policies,
                                                   const SolverConfig& config,
                                                   std::uint64_t master_seed,
                                                   std::size_t path_index = 0) {
  if (policies.empty()) throw ConfigError("solve_grid_sampling: need at least one policy");
  model.validate(config.partition.horizon());
  if (config.refine == 0) throw ConfigError("solve_grid_sampling: refine must be >= 1");
  for (const auto& policy : policies) policy.validate();

  const auto fine = config.partition.refined(config.refine);
  const auto draw = sample_grid_randomization(config.partition, model.dims.d,
                                              SeedSpec{master_seed, "xi", path_index});
  std::vector<JumpEvent> events;
  if (model.levy.has_jumps()) {
    auto jump_stream = derive_stream(SeedSpec{master_seed, "jump", path_index});
    events = sample_poisson_measure(model.levy, fine.horizon(), jump_stream);
  }
  const auto merged = detail::insert_event_times(fine, events);
  const auto brownian =
      sample_brownian(merged, model.dims.p, SeedSpec{master_seed, "bm", path_index});

  std::vector<PathRecord> records;
  records.reserve(policies.size());
  for (const auto& policy : policies) {
    auto record = detail::euler_single(
        model, config, merged, brownian, events,
        [&](double s, const Vec& x, double step_end) {
          return policy.h(s, x, draw.lookup(step_end));
        },
        "grid");
    record.policy_id = policy.id;
    records.push_back(std::move(record));
  }
  return records;
}

/**
 * Precomputed limit-dynamics coefficients at the starts of the refined grid
 * steps, shared across paths. Only valid for models whose coefficients do
 * not depend on the state (the `state_independent_coeffs` flag).
 */
struct LimitCoefficientTable {
  Partition fine;
  std::vector<Mat> factor;      // (K*m) x (K*m) diffusion factor per step
  std::vector<Vec> drift;       // stacked policy-averaged drift per step
  std::vector<Vec> small_comp;  // stacked small-jump compensator per unit time
};

namespace detail {

inline Vec stacked_limit_drift(const JumpDiffusionModel& model,
                               const std::vector<RandomizedPolicy>& policies, double s,
                               const std::vector<Vec>& states, const UnitCubeRule& rule) {
  const std::size_t m = model.dims.m;
  Vec out(policies.size() * m, 0.0);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    const Vec avg = rule.integrate_vec(
        [&](const Vec& u) { return model.b(s, states[k], policies[k].h(s, states[k], u)); }, m);
    for (std::size_t r = 0; r < m; ++r) out[k * m + r] = avg[r];
  }
  return out;
}

inline Vec stacked_limit_compensator(const JumpDiffusionModel& model,
                                     const std::vector<RandomizedPolicy>& policies, double s,
                                     const std::vector<Vec>& states, const UnitCubeRule& rule) {
  const std::size_t m = model.dims.m;
  Vec out(policies.size() * m, 0.0);
  if (!model.levy.has_jumps() || !(model.levy.truncation_radius > 0.0) || !model.gamma) return out;
  for (std::size_t k = 0; k < policies.size(); ++k) {
    for (std::size_t r = 0; r < m; ++r) {
      if (model.gamma_control_independent) {
        const Vec y = policies[k].h(s, states[k], rule.nodes.front());
        out[k * m + r] = model.levy.integrate_z(
            s, [&](const Vec& z) { return model.gamma(s, states[k], y, z)[r]; },
            JumpRegion::small);
      } else {
        out[k * m + r] = rule.integrate([&](const Vec& u) {
          const Vec y = policies[k].h(s, states[k], u);
          return model.levy.integrate_z(
              s, [&](const Vec& z) { return model.gamma(s, states[k], y, z)[r]; },
              JumpRegion::small);
        });
      }
    }
  }
  return out;
}

}  // namespace detail

/** Build the per-step coefficient table (state-independent models only). */
inline LimitCoefficientTable prepare_limit_coefficients(
    const JumpDiffusionModel& model, const std::vector<RandomizedPolicy>& policies,
    const SolverConfig& config) {
  if (!model.state_independent_coeffs)
    throw ConfigError("prepare_limit_coefficients: model coefficients depend on the state");
  if (policies.empty()) throw ConfigError("prepare_limit_coefficients: need at least one policy");
  LimitCoefficientTable table;
  table.fine = config.partition.refined(config.refine);
  const std::vector<Vec> dummy_states(policies.size(), model.x0);
  table.factor.reserve(table.fine.intervals());
  table.drift.reserve(table.fine.intervals());
  table.small_comp.reserve(table.fine.intervals());
  for (std::size_t k = 0; k < table.fine.intervals(); ++k) {
    const double s = table.fine.t[k];
    table.factor.push_back(
        psd_factor(effective_covariance(model, policies, s, dummy_states, config.u_rule)));
    table.drift.push_back(
        detail::stacked_limit_drift(model, policies, s, dummy_states, config.u_rule));
    table.small_comp.push_back(
        detail::stacked_limit_compensator(model, policies, s, dummy_states, config.u_rule));
  }
  return table;
}

/**
 * One realization of the joint limit dynamics for K policies. All K systems
 * share the Gaussian step increments (correlated through the effective
 * covariance), the jump events and the events' uniform marks. Returns one
 * record per policy, on a common grid.
 *
 * When `table` is supplied (state-independent coefficients), the per-step
 * covariance factor, drift and compensator come from it; steps created by
 * jump-time insertion reuse the coefficients of the refined step containing
 * them.
 */
inline std::vector<PathRecord> solve_limit_joint(const JumpDiffusionModel& model,
                                                 const std::vector<RandomizedPolicy>& policies,
                                                 const SolverConfig& config,
                                                 std::uint64_t master_seed,
                                                 std::size_t path_index = 0,
                                                 const LimitCoefficientTable* table = nullptr) {
  if (policies.empty()) throw ConfigError("solve_limit_joint: need at least one policy");
  model.validate(config.partition.horizon());
  if (config.refine == 0) throw ConfigError("solve_limit_joint: refine must be >= 1");
  if (config.u_rule.dim != model.dims.d)
    throw ConfigError("solve_limit_joint: control rule dimension must match the mark dimension");
  for (const auto& policy : policies) policy.validate();
  const std::size_t kCount = policies.size();
  const std::size_t m = model.dims.m;

  const auto fine = config.partition.refined(config.refine);
  if (table && table->fine.t != fine.t)
    throw ConfigError("solve_limit_joint: coefficient table was built for a different grid");

  std::vector<JumpEvent> events;
  if (model.levy.has_jumps()) {
    auto jump_stream = derive_stream(SeedSpec{master_seed, "jump", path_index});
    events = sample_poisson_measure(model.levy, fine.horizon(), jump_stream);
    auto mark_stream = derive_stream(SeedSpec{master_seed, "jumpmark", path_index});
    attach_uniform_marks_limit(events, model.dims.d, mark_stream);
  }
  const auto merged = detail::insert_event_times(fine, events);
  auto gauss_stream = derive_stream(SeedSpec{master_seed, "bm", path_index});

  std::vector<PathRecord> records(kCount);
  for (std::size_t k = 0; k < kCount; ++k) {
    records[k].scheme = "limit";
    records[k].policy_id = policies[k].id;
    records[k].times = merged.t;
    records[k].states.reserve(merged.t.size());
    records[k].states.push_back(model.x0);
  }
  std::vector<Vec> states(kCount, model.x0);

  Vec gauss(kCount * m), scaled(kCount * m);
  std::size_t next_event = 0;
  for (std::size_t step = 0; step < merged.intervals(); ++step) {
    const double s = merged.t[step];
    const double e = merged.t[step + 1];
    const double dt = e - s;
    const std::size_t fine_step = fine.interval_containing(e) - 1;

    const Mat* factor;
    const Vec* drift;
    const Vec* comp;
    Mat local_factor(0, 0);
    Vec local_drift, local_comp;
    if (table) {
      factor = &table->factor[fine_step];
      drift = &table->drift[fine_step];
      comp = &table->small_comp[fine_step];
    } else {
      local_factor = psd_factor(effective_covariance(model, policies, s, states, config.u_rule));
      local_drift = detail::stacked_limit_drift(model, policies, s, states, config.u_rule);
      local_comp = detail::stacked_limit_compensator(model, policies, s, states, config.u_rule);
      factor = &local_factor;
      drift = &local_drift;
      comp = &local_comp;
    }

    for (double& g : gauss) g = gauss_stream.normal();
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t i = 0; i < kCount * m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kCount * m; ++j) acc += (*factor)(i, j) * gauss[j];
      scaled[i] = sqrt_dt * acc;
    }
    for (std::size_t k = 0; k < kCount; ++k) {
      for (std::size_t r = 0; r < m; ++r) {
        states[k][r] += ((*drift)[k * m + r] - (*comp)[k * m + r]) * dt + scaled[k * m + r];
      }
    }
    while (next_event < events.size() && events[next_event].t == e) {
      const auto& event = events[next_event];
      for (std::size_t k = 0; k < kCount; ++k) {
        const Vec y = policies[k].h(e, states[k], event.u);
        const Vec jump = model.gamma(e, states[k], y, event.z);
        if (jump.size() != m)
          throw ConfigError("solve_limit_joint: gamma output has wrong dimension");
        for (std::size_t r = 0; r < m; ++r) states[k][r] += jump[r];
        records[k].jumps_applied += 1;
        records[k].jump_times.push_back(e);
      }
      next_event += 1;
    }
    for (std::size_t k = 0; k < kCount; ++k) {
      detail::check_blowup(states[k], config.blowup_guard, step + 1, e, "limit");
      records[k].states.push_back(states[k]);
    }
  }
  return records;
}

/**
 * Precomputed exploratory coefficients (drift and diffusion per refined
 * step), shared across paths; state-independent models only.
 */
struct ExploratoryCoefficientTable {
  Partition fine;
  std::vector<Vec> drift;      // one per policy, per step, scalar
  std::vector<Vec> diffusion;  // sqrt of averaged squared diffusion
};

namespace detail {

inline std::pair<double, double> exploratory_coeffs_at(const JumpDiffusionModel& model,
                                                       const RandomizedPolicy& policy, double s,
                                                       const Vec& x, const UnitCubeRule& rule) {
  const double drift =
      rule.integrate([&](const Vec& u) { return model.b(s, x, policy.h(s, x, u))[0]; });
  double var = rule.integrate([&](const Vec& u) {
    const double a = model.a(s, x, policy.h(s, x, u))(0, 0);
    return a * a;
  });
  if (var < -1e-12)
    throw NumericalError("solve_exploratory: averaged squared diffusion is negative at t=" +
                         std::to_string(s));
  var = std::max(var, 0.0);
  return {drift, std::sqrt(var)};
}

}  // namespace detail

inline ExploratoryCoefficientTable prepare_exploratory_coefficients(
    const JumpDiffusionModel& model, const std::vector<RandomizedPolicy>& policies,
    const SolverConfig& config) {
  if (!model.state_independent_coeffs)
    throw ConfigError("prepare_exploratory_coefficients: model coefficients depend on the state");
  ExploratoryCoefficientTable table;
  table.fine = config.partition.refined(config.refine);
  table.drift.assign(policies.size(), Vec(table.fine.intervals()));
  table.diffusion.assign(policies.size(), Vec(table.fine.intervals()));
  for (std::size_t k = 0; k < policies.size(); ++k) {
    for (std::size_t step = 0; step < table.fine.intervals(); ++step) {
      const auto [drift, diffusion] = detail::exploratory_coeffs_at(
          model, policies[k], table.fine.t[step], model.x0, config.u_rule);
      table.drift[k][step] = drift;
      table.diffusion[k][step] = diffusion;
    }
  }
  return table;
}

/**
 * K scalar exploratory paths driven by one shared Brownian motion (pass one
 * policy for a single path). Requires m = p = d = 1 and a jump-free model:
 * the averaged dynamics are defined for continuous systems.
 */
inline std::vector<PathRecord> solve_exploratory_joint(
    const JumpDiffusionModel& model, const std::vector<RandomizedPolicy>& policies,
    const SolverConfig& config, std::uint64_t master_seed, std::size_t path_index = 0,
    const ExploratoryCoefficientTable* table = nullptr) {
  if (policies.empty()) throw ConfigError("solve_exploratory_joint: need at least one policy");
  if (model.dims.m != 1 || model.dims.p != 1 || model.dims.d != 1)
    throw ConfigError("solve_exploratory_joint: averaged dynamics require m = p = d = 1");
  if (model.levy.has_jumps() || model.gamma)
    throw ConfigError("solve_exploratory_joint: averaged dynamics require a jump-free model");
  model.validate(config.partition.horizon());
  if (config.refine == 0) throw ConfigError("solve_exploratory_joint: refine must be >= 1");
  if (config.u_rule.dim != 1)
    throw ConfigError("solve_exploratory_joint: control rule must be one-dimensional");

  const auto fine = config.partition.refined(config.refine);
  if (table && table->fine.t != fine.t)
    throw ConfigError("solve_exploratory_joint: coefficient table was built for a different grid");
  const auto brownian = sample_brownian(fine, 1, SeedSpec{master_seed, "bm", path_index});

  std::vector<PathRecord> records(policies.size());
  for (std::size_t k = 0; k < policies.size(); ++k) {
    auto& record = records[k];
    record.scheme = "exploratory";
    record.policy_id = policies[k].id;
    record.times = fine.t;
    record.states.reserve(fine.t.size());
    Vec x = model.x0;
    record.states.push_back(x);
    for (std::size_t step = 0; step < fine.intervals(); ++step) {
      const double s = fine.t[step];
      const double dt = fine.t[step + 1] - s;
      double drift, diffusion;
      if (table) {
        drift = table->drift[k][step];
        diffusion = table->diffusion[k][step];
      } else {
        const auto pair = detail::exploratory_coeffs_at(model, policies[k], s, x, config.u_rule);
        drift = pair.first;
        diffusion = pair.second;
      }
      x[0] += drift * dt + diffusion * brownian.dB[step][0];
      detail::check_blowup(x, config.blowup_guard, step + 1, fine.t[step + 1], "exploratory");
      record.states.push_back(x);
    }
  }
  return records;
}

inline PathRecord solve_exploratory(const JumpDiffusionModel& model,
                                    const RandomizedPolicy& policy, const SolverConfig& config,
                                    std::uint64_t master_seed, std::size_t path_index = 0) {
  auto records = solve_exploratory_joint(model, {policy}, config, master_seed, path_index);
  return std::move(records.front());
}

/**
 * Realized covariation of two paths on a common grid: the sum over recorded
 * increments of the inner product <dX_a, dX_b>. The two records must share
 * their time grid exactly (solver outputs from one joint call do).
 */
inline double realized_covariation(const PathRecord& a, const PathRecord& b) {
  if (a.times != b.times)
    throw ConfigError("realized_covariation: paths are recorded on different grids");
  if (a.states.size() != a.times.size() || b.states.size() != b.times.size())
    throw ConfigError("realized_covariation: malformed path records");
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < a.times.size(); ++k) {
    const Vec& a0 = a.states[k];
    const Vec& a1 = a.states[k + 1];
    const Vec& b0 = b.states[k];
    const Vec& b1 = b.states[k + 1];
    for (std::size_t r = 0; r < a0.size(); ++r) acc += (a1[r] - a0[r]) * (b1[r] - b0[r]);
  }
  return acc;
}

}  // namespace gridrl
