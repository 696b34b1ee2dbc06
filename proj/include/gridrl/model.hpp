#pragma once

/**
 * Domain types for the controlled jump-diffusion system: dimensions, Levy
 * measure specifications, coefficient maps, randomized policies (uniform
 * executors with optional relaxed densities), and coefficient evaluation.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/quadrature.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/** Problem dimensions: state m, Brownian p, control d, jump mark q. */
struct Dimensions {
  std::size_t m = 1;  // state
  std::size_t p = 1;  // Brownian components
  std::size_t d = 1;  // control / uniform-mark components
  std::size_t q = 1;  // jump-mark components

  void validate() const {
    if (m == 0 || p == 0 || d == 0 || q == 0)
      throw ConfigError("Dimensions: all of m, p, d, q must be >= 1");
  }
};

/** Drift map (t, x, y) -> R^m. */
using DriftFn = std::function<Vec(double, const Vec&, const Vec&)>;
/** Diffusion map (t, x, y) -> R^{m x p}. */
using DiffusionFn = std::function<Mat(double, const Vec&, const Vec&)>;
/** Jump coefficient map (t, x, y, z) -> R^m. */
using JumpCoeffFn = std::function<Vec(double, const Vec&, const Vec&, const Vec&)>;
/** Deterministic feedback control (t, x) -> action in R^d. */
using FeedbackPolicy = std::function<Vec(double, const Vec&)>;

enum class JumpKind { none, finite_activity, truncated_infinite_activity };

/** Region selector relative to a radius split of the jump-mark space. */
enum class JumpRegion { small, large, all };

/** One quadrature node of the (normalized) jump-size law. */
struct LevyNode {
  Vec z;
  double w = 0.0;
};

/**
 * Specification of the jump intensity measure nu_t(dz).
 *
 * Finite-activity kind: nu_t = rate(t) * (normalized size law); all jumps are
 * sampleable. Truncated-infinite-activity kind: only jumps with |z| above
 * `sampling_cutoff` are sampled; `rate(t)` is the mass of that sampleable
 * region and `residual_second_moment(t)` supplies the analytic second moment
 * of the neglected small-jump part (reported as a bias bound, never sampled).
 *
 * `size_nodes` is a quadrature representation of the normalized size law on
 * the sampleable region: integral of f dnu_t ~= rate(t) * sum_j w_j f(z_j).
 * The truncation radius splits compensated (0 < |z| <= radius) from raw
 * (|z| > radius) jump handling; radius may be 0 (nothing compensated) or
 * infinity (everything compensated).
 */
struct LevyMeasureSpec {
  JumpKind kind = JumpKind::none;
  double truncation_radius = std::numeric_limits<double>::infinity();
  std::function<double(double)> rate;  // mass of the sampleable region at time t
  double rate_bound = 0.0;             // sup_t rate(t), used for thinning
  std::function<Vec(double, Stream&)> sample_jump_size;
  std::vector<LevyNode> size_nodes;
  double sampling_cutoff = 0.0;
  std::function<double(double)> residual_second_moment;  // integral of |z|^2 over |z| <= cutoff

  [[nodiscard]] bool has_jumps() const { return kind != JumpKind::none; }

  void validate(double horizon) const {
    if (kind == JumpKind::none) return;
    if (!(horizon > 0.0)) throw ConfigError("LevyMeasureSpec: horizon must be > 0");
    if (!rate) throw ConfigError("LevyMeasureSpec: rate function required");
    if (!(rate_bound > 0.0)) throw ConfigError("LevyMeasureSpec: rate_bound must be > 0");
    if (!sample_jump_size) throw ConfigError("LevyMeasureSpec: jump-size sampler required");
    if (size_nodes.empty()) throw ConfigError("LevyMeasureSpec: size quadrature nodes required");
    if (truncation_radius < 0.0) throw ConfigError("LevyMeasureSpec: truncation radius must be >= 0");
    double wsum = 0.0;
    for (const auto& node : size_nodes) {
      if (node.z.empty() || !all_finite(node.z))
        throw ConfigError("LevyMeasureSpec: size node marks must be finite and non-empty");
      double norm = norm2(node.z);
      if (!(norm > 0.0)) throw ConfigError("LevyMeasureSpec: size node at the origin");
      wsum += node.w;
    }
    if (std::abs(wsum - 1.0) > 1e-8)
      throw ConfigError("LevyMeasureSpec: size-node weights must sum to 1 (normalized law)");
    // rate(t) must be nonnegative and respect the thinning bound on a probe grid.
    for (std::size_t i = 0; i <= 256; ++i) {
      const double t = horizon * static_cast<double>(i) / 256.0;
      const double r = rate(t);
      if (!(r >= 0.0) || !std::isfinite(r))
        throw ConfigError("LevyMeasureSpec: rate must be finite and >= 0");
      if (r > rate_bound * (1.0 + 1e-9))
        throw ConfigError("LevyMeasureSpec: rate exceeds rate_bound at t=" + std::to_string(t));
    }
    if (kind == JumpKind::truncated_infinite_activity) {
      if (!(sampling_cutoff > 0.0))
        throw ConfigError("LevyMeasureSpec: truncated kind needs a positive sampling cutoff");
      if (!residual_second_moment)
        throw ConfigError("LevyMeasureSpec: truncated kind needs residual_second_moment");
    }
  }

  /** Integrate f(z) against nu_t(dz) over nodes selected by a predicate on z. */
  template <typename F, typename Pred>
  double integrate_z_where(double t, F&& f, Pred&& keep) const {
    if (kind == JumpKind::none) return 0.0;
    double s = 0.0;
    for (const auto& node : size_nodes) {
      if (keep(node.z)) s += node.w * f(node.z);
    }
    return rate(t) * s;
  }

  /**
   * Integrate f(z) against nu_t(dz) over a region relative to the truncation
   * radius. Asking for the small region with radius 0, or the large region
   * with radius infinity, is a structural mismatch and errors.
   */
  template <typename F>
  double integrate_z(double t, F&& f, JumpRegion region) const {
    if (kind == JumpKind::none) return 0.0;
    const double radius = truncation_radius;
    switch (region) {
      case JumpRegion::small:
        if (radius == 0.0)
          throw ConfigError("LevyMeasureSpec: small-jump region is empty (truncation radius 0)");
        return integrate_z_where(t, f, [radius](const Vec& z) { return norm2(z) <= radius; });
      case JumpRegion::large:
        if (std::isinf(radius))
          throw ConfigError(
              "LevyMeasureSpec: large-jump region is empty (infinite truncation radius)");
        return integrate_z_where(t, f, [radius](const Vec& z) { return norm2(z) > radius; });
      case JumpRegion::all:
        return integrate_z_where(t, f, [](const Vec&) { return true; });
    }
    throw ConfigError("LevyMeasureSpec: unknown jump region");
  }
};

/** The controlled jump-diffusion system (coefficients, jumps, initial state). */
struct JumpDiffusionModel {
  Dimensions dims;
  Vec x0;
  DriftFn b;
  DiffusionFn a;
  JumpCoeffFn gamma;
  LevyMeasureSpec levy;
  /** True when gamma(t,x,y,z) does not depend on y; enables cheaper compensators. */
  bool gamma_control_independent = false;
  /**
   * True when b, a, gamma do not depend on the state x (and policies depend on
   * time only through their own maps); solvers may then hoist control-space
   * quadratures out of the per-step loop. Built-in scenarios set this
   * truthfully; user models default to the conservative false.
   */
  bool state_independent_coeffs = false;

  void validate(double horizon) const {
    dims.validate();
    if (x0.size() != dims.m) throw ConfigError("JumpDiffusionModel: x0 has wrong dimension");
    if (!b || !a) throw ConfigError("JumpDiffusionModel: drift and diffusion maps required");
    if (levy.has_jumps() && !gamma)
      throw ConfigError("JumpDiffusionModel: jump coefficient required when jumps are present");
    levy.validate(horizon);
  }
};

/**
 * A randomized policy: a measurable executor h(t, x, u) mapping a uniform
 * variate u in [0,1]^d to an action, with an optional relaxed density
 * (the pushforward law of the uniform under h(t,x,.)) and optional
 * closed-form entropy. The support box [lo, hi] bounds the density's support
 * for quadrature purposes.
 */
struct RandomizedPolicy {
  std::string id;
  std::size_t action_dim = 1;
  std::function<Vec(double, const Vec&, const Vec&)> h;
  std::function<double(double, const Vec&, const Vec&)> relaxed_density;  // optional
  Vec support_lo, support_hi;                                             // with relaxed_density
  std::function<double(double, const Vec&)> entropy_closed_form;          // optional
  /** False when h ignores u (a deterministic feedback policy in disguise). */
  bool depends_on_u = true;

  [[nodiscard]] bool has_density() const { return static_cast<bool>(relaxed_density); }

  void validate() const {
    if (!h) throw ConfigError("RandomizedPolicy: executor h required");
    if (action_dim == 0) throw ConfigError("RandomizedPolicy: action dimension must be >= 1");
    if (has_density()) {
      if (support_lo.size() != action_dim || support_hi.size() != action_dim)
        throw ConfigError("RandomizedPolicy: support box must match the action dimension");
      for (std::size_t k = 0; k < action_dim; ++k) {
        if (!(support_hi[k] > support_lo[k]))
          throw ConfigError("RandomizedPolicy: support box must have positive extent");
      }
    }
  }
};

/** Evaluate drift and diffusion at (t, x, y); non-finite output is an error. */
inline std::pair<Vec, Mat> eval_coeffs(const JumpDiffusionModel& model, double t, const Vec& x,
                                       const Vec& y) {
  Vec drift = model.b(t, x, y);
  Mat diffusion = model.a(t, x, y);
  if (drift.size() != model.dims.m)
    throw ConfigError("eval_coeffs: drift output has wrong dimension at t=" + std::to_string(t));
  if (diffusion.rows != model.dims.m || diffusion.cols != model.dims.p)
    throw ConfigError("eval_coeffs: diffusion output has wrong shape at t=" + std::to_string(t));
  if (!all_finite(drift))
    throw NumericalError("eval_coeffs: non-finite drift at t=" + std::to_string(t));
  if (!all_finite(diffusion))
    throw NumericalError("eval_coeffs: non-finite diffusion at t=" + std::to_string(t));
  return {std::move(drift), std::move(diffusion)};
}

namespace detail {

inline double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

/** One-dimensional adaptive entropy quadrature over [lo, hi]. */
inline double entropy_quadrature_1d(const std::function<double(double)>& density, double lo,
                                    double hi) {
  const auto integrand = [&](double y) { return -xlogx(density(y)); };
  static constexpr std::size_t orders[] = {64, 96, 128, 192};
  double prev = gl_integrate(lo, hi, integrand, orders[0]);
  for (std::size_t k = 1; k < std::size(orders); ++k) {
    const double next = gl_integrate(lo, hi, integrand, orders[k]);
    if (std::abs(next - prev) <= 1e-9 * std::max(1.0, std::abs(next))) return next;
    prev = next;
  }
  throw NumericalError("entropy: quadrature did not converge on the support box");
}

}  // namespace detail

/**
 * Shannon entropy -integral of hdot log hdot of the relaxed law at (t, x):
 * the closed form when provided, otherwise adaptive quadrature over the
 * support box (one-dimensional actions).
 */
inline double entropy(const RandomizedPolicy& policy, double t, const Vec& x) {
  if (policy.entropy_closed_form) return policy.entropy_closed_form(t, x);
  if (!policy.has_density())
    throw ConfigError("entropy: policy has neither closed form nor relaxed density");
  if (policy.action_dim != 1)
    throw ConfigError("entropy: numeric quadrature implemented for one-dimensional actions only");
  const auto density = [&](double y) { return policy.relaxed_density(t, x, Vec{y}); };
  return detail::entropy_quadrature_1d(density, policy.support_lo[0], policy.support_hi[0]);
}

/**
 * Goodness-of-fit between the executor's sample law and the declared relaxed
 * density at (t, x): the Kolmogorov-Smirnov sup distance between the
 * empirical CDF of h(t, x, U), U uniform, and the CDF obtained by integrating
 * the density (tabulated on `bins` cells, linearly interpolated).
 * One-dimensional actions. Errors if the density does not integrate to 1.
 */
inline double policy_pushforward_check(const RandomizedPolicy& policy, double t, const Vec& x,
                                       std::size_t n_samples, std::size_t bins, Stream& stream) {
  if (!policy.has_density()) throw ConfigError("policy_pushforward_check: relaxed density required");
  if (policy.action_dim != 1)
    throw ConfigError("policy_pushforward_check: one-dimensional actions only");
  if (n_samples == 0 || bins < 2)
    throw ConfigError("policy_pushforward_check: need n_samples >= 1 and bins >= 2");
  const double lo = policy.support_lo[0], hi = policy.support_hi[0];
  const auto density = [&](double y) { return policy.relaxed_density(t, x, Vec{y}); };

  const double mass = gl_integrate(lo, hi, density, 128);
  if (std::abs(mass - 1.0) > 1e-3)
    throw ConfigError("policy_pushforward_check: density integrates to " + std::to_string(mass) +
                      ", not 1");

  // Cumulative density table on bins cells.
  Vec grid(bins + 1), cdf(bins + 1, 0.0);
  for (std::size_t i = 0; i <= bins; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  for (std::size_t i = 1; i <= bins; ++i)
    cdf[i] = cdf[i - 1] + gl_integrate(grid[i - 1], grid[i], density, 8);
  const auto cdf_at = [&](double y) {
    if (y <= lo) return 0.0;
    if (y >= hi) return cdf[bins] / mass;
    const double pos = (y - lo) / (hi - lo) * static_cast<double>(bins);
    const auto cell = std::min(static_cast<std::size_t>(pos), bins - 1);
    const double frac = pos - static_cast<double>(cell);
    return (cdf[cell] + frac * (cdf[cell + 1] - cdf[cell])) / mass;
  };

  Vec samples(n_samples);
  Vec u(1);
  for (std::size_t i = 0; i < n_samples; ++i) {
    u[0] = stream.uniform();
    samples[i] = policy.h(t, x, u)[0];
  }
  std::sort(samples.begin(), samples.end());
  double d_stat = 0.0;
  const double n = static_cast<double>(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double f = cdf_at(samples[i]);
    d_stat = std::max(d_stat, std::max((static_cast<double>(i) + 1.0) / n - f,
                                       f - static_cast<double>(i) / n));
  }
  return d_stat;
}

}  // namespace gridrl
