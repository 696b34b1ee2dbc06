#pragma once

/**
 * Limit-law diagnostics for grid-randomized dynamics.
 *
 * The driving object is a bundle of bounded test maps (drift map f_0,
 * Brownian maps f_1..f_p, small- and large-jump maps) on time x control
 * space. The module provides:
 *
 *  - psi:                   the per-time rate of the expected increment of a
 *                           smooth test function g applied to one pre-limit
 *                           summand (drift/diffusion term at the origin plus
 *                           compensated small-jump and raw large-jump terms).
 *  - limit_characteristics: drift curve, second characteristic and jump
 *                           functionals of the limit process, by quadrature.
 *  - triangular_sum:        Monte-Carlo estimate of the sum over partition
 *                           intervals of E[g(increment)], each interval
 *                           simulated independently.
 *  - convergence_report:    per-mesh error table of the triangular sums
 *                           against the quadrature target.
 *  - moment_compare:        expectation tables of path functionals under the
 *                           grid-sampling solver vs the limit solver.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gridrl/core.hpp"
#include "gridrl/model.hpp"
#include "gridrl/noise.hpp"
#include "gridrl/quadrature.hpp"
#include "gridrl/rng.hpp"
#include "gridrl/sde.hpp"

namespace gridrl {

/** Map (s, u) -> R^m on time x the control cube. */
using TimeControlField = std::function<Vec(double, const Vec&)>;
/** Map (s, z, u) -> R^m on time x jump-size space x the control cube. */
using JumpControlField = std::function<Vec(double, const Vec&, const Vec&)>;
/** Scalar map on R^m. */
using ScalarField = std::function<double(const Vec&)>;

/**
 * A C^2-smooth bounded scalar test function: values everywhere plus the
 * gradient and Hessian at the origin (all psi needs of its derivatives).
 */
struct SmoothTestFunction {
  ScalarField value;
  Vec grad0;
  Mat hess0{0, 0};

  void validate(std::size_t m) const {
    if (!value) throw ConfigError("SmoothTestFunction: value map required");
    if (grad0.size() != m)
      throw ConfigError("SmoothTestFunction: gradient at 0 must have the state dimension");
    if (hess0.rows != m || hess0.cols != m)
      throw ConfigError("SmoothTestFunction: Hessian at 0 must be m x m");
  }
};

/**
 * Smooth truncation of the state space: h(z) = z * s(|z|) with a C^2 radial
 * profile s that is 1 on |z| <= r_inner and 0 on |z| >= r_outer (quintic
 * blend in between). Identity near the origin, compactly supported, with
 * analytic Jacobian and per-component Hessians.
 */
class TruncationFunction {
 public:
  TruncationFunction(double r_inner, double r_outer) : r_inner_(r_inner), r_outer_(r_outer) {
    if (!(r_inner > 0.0) || !(r_outer > r_inner))
      throw ConfigError("TruncationFunction: need 0 < r_inner < r_outer");
  }
  TruncationFunction() : TruncationFunction(1.0, 2.0) {}

  [[nodiscard]] double inner_radius() const { return r_inner_; }
  [[nodiscard]] double outer_radius() const { return r_outer_; }

  [[nodiscard]] Vec value(const Vec& z) const {
    const double s = profile(norm2(z));
    Vec out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] * s;
    return out;
  }

  [[nodiscard]] double component(const Vec& z, std::size_t k) const {
    return z[k] * profile(norm2(z));
  }

  /** Jacobian J(k, j) = d h^(k) / d z_j. */
  [[nodiscard]] Mat jacobian(const Vec& z) const {
    const std::size_t m = z.size();
    const double rho = norm2(z);
    Mat jac(m, m);
    const double s = profile(rho);
    for (std::size_t k = 0; k < m; ++k) jac(k, k) = s;
    if (rho > r_inner_) {
      const double s1 = profile_d1(rho);
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t j = 0; j < m; ++j) jac(k, j) += z[k] * s1 * z[j] / rho;
    }
    return jac;
  }

  /** Hessian of component k: H(i, j) = d^2 h^(k) / d z_i d z_j. */
  [[nodiscard]] Mat hessian(const Vec& z, std::size_t k) const {
    const std::size_t m = z.size();
    Mat hess(m, m);
    const double rho = norm2(z);
    if (rho <= r_inner_) return hess;  // identity region: all second derivatives vanish
    const double s1 = profile_d1(rho);
    const double s2 = profile_d2(rho);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double v = 0.0;
        if (i == k) v += s1 * z[j] / rho;
        if (j == k) v += s1 * z[i] / rho;
        v += z[k] * (s2 * z[i] * z[j] / (rho * rho) + s1 * ((i == j ? 1.0 : 0.0) / rho - z[i] * z[j] / (rho * rho * rho)));
        hess(i, j) = v;
      }
    }
    return hess;
  }

  /**
   * The product h^(k) h^(k') as a smooth test function on R^m: equal to
   * z_k z_k' near the origin, so its gradient there vanishes and its Hessian
   * is the symmetrized pair indicator.
   */
  [[nodiscard]] SmoothTestFunction pair_product(std::size_t m, std::size_t k,
                                                std::size_t k_prime) const {
    if (k >= m || k_prime >= m)
      throw ConfigError("TruncationFunction: component index out of range");
    SmoothTestFunction g;
    const TruncationFunction self = *this;
    g.value = [self, k, k_prime](const Vec& y) {
      const double s = self.profile(norm2(y));
      return y[k] * s * y[k_prime] * s;
    };
    g.grad0 = Vec(m, 0.0);
    g.hess0 = Mat(m, m);
    g.hess0(k, k_prime) += 1.0;
    g.hess0(k_prime, k) += 1.0;
    return g;
  }

 private:
  [[nodiscard]] double profile(double rho) const {
    if (rho <= r_inner_) return 1.0;
    if (rho >= r_outer_) return 0.0;
    const double w = (rho - r_inner_) / (r_outer_ - r_inner_);
    return 1.0 - w * w * w * (10.0 + w * (-15.0 + 6.0 * w));
  }

  [[nodiscard]] double profile_d1(double rho) const {
    if (rho <= r_inner_ || rho >= r_outer_) return 0.0;
    const double span = r_outer_ - r_inner_;
    const double w = (rho - r_inner_) / span;
    return -30.0 * w * w * (1.0 - w) * (1.0 - w) / span;
  }

  [[nodiscard]] double profile_d2(double rho) const {
    if (rho <= r_inner_ || rho >= r_outer_) return 0.0;
    const double span = r_outer_ - r_inner_;
    const double w = (rho - r_inner_) / span;
    return -60.0 * w * (1.0 - w) * (1.0 - 2.0 * w) / (span * span);
  }

  double r_inner_;
  double r_outer_;
};

/**
 * The bundle of bounded test maps driving one grid-randomized system: a
 * drift map, one map per Brownian direction, and jump maps for sizes below
 * and above the intensity measure's truncation radius (the small-jump map
 * enters scaled by |z| and compensated). Null maps mean "absent". The
 * declared sup-norm bounds feed the tail estimates and are spot-checked by
 * validate().
 */
struct TestFunctionBundle {
  std::size_t m = 1;          // output (state) dimension
  std::size_t d = 1;          // control-cube dimension
  double levy_radius = 0.0;   // size split the jump maps were written for
  TimeControlField drift_map;
  std::vector<TimeControlField> brownian_maps;
  JumpControlField small_jump_map;
  JumpControlField large_jump_map;
  double sup_drift = 0.0;
  Vec sup_brownian;           // one bound per Brownian map
  double sup_small = 0.0;
  double sup_large = 0.0;

  [[nodiscard]] bool has_jump_maps() const {
    return static_cast<bool>(small_jump_map) || static_cast<bool>(large_jump_map);
  }

  /**
   * Structural checks plus a bound probe: every supplied map is evaluated on
   * a coarse (time x control x size) lattice and must stay finite and within
   * its declared sup-norm (small slack for roundoff).
   */
  void validate(const LevyMeasureSpec& levy, double horizon, const UnitCubeRule& u_rule) const {
    if (m == 0 || d == 0) throw ConfigError("TestFunctionBundle: m and d must be >= 1");
    if (u_rule.dim != d)
      throw ConfigError("TestFunctionBundle: control rule dimension must match d");
    if (sup_brownian.size() != brownian_maps.size())
      throw ConfigError("TestFunctionBundle: one declared bound per Brownian map required");
    if (has_jump_maps()) {
      if (!levy.has_jumps())
        throw ConfigError("TestFunctionBundle: jump maps supplied but the intensity measure has no jumps");
      if (levy_radius != levy.truncation_radius)
        throw ConfigError("TestFunctionBundle: jump maps expect a different truncation radius");
    }
    const double slack = 1e-9;
    std::vector<double> times;
    for (int i = 0; i <= 8; ++i) times.push_back(horizon * static_cast<double>(i) / 8.0);
    std::vector<Vec> probes;
    for (std::size_t i = 0; i < u_rule.nodes.size(); i += std::max<std::size_t>(1, u_rule.nodes.size() / 16))
      probes.push_back(u_rule.nodes[i]);
    auto check = [&](const Vec& v, double bound, const char* what) {
      if (v.size() != m) throw ConfigError(std::string("TestFunctionBundle: ") + what + " has wrong output dimension");
      if (!all_finite(v)) throw NumericalError(std::string("TestFunctionBundle: ") + what + " is not finite");
      if (norm2(v) > bound + slack)
        throw ConfigError(std::string("TestFunctionBundle: ") + what + " exceeds its declared bound");
    };
    for (const double s : times) {
      for (const Vec& u : probes) {
        if (drift_map) check(drift_map(s, u), sup_drift, "drift map");
        for (std::size_t l = 0; l < brownian_maps.size(); ++l)
          check(brownian_maps[l](s, u), sup_brownian[l], "Brownian map");
        if (levy.has_jumps() && has_jump_maps()) {
          // Each map is probed only on the size region where it is ever
          // evaluated: compensated sizes for the small map, raw for the large.
          for (const auto& node : levy.size_nodes) {
            const bool small_size = norm2(node.z) <= levy.truncation_radius;
            if (small_jump_map && small_size)
              check(small_jump_map(s, node.z, u), sup_small, "small-jump map");
            if (large_jump_map && !small_size)
              check(large_jump_map(s, node.z, u), sup_large, "large-jump map");
          }
        }
      }
    }
  }
};

namespace detail {

/** Whether the measure has mass below / above its truncation radius worth integrating. */
inline bool small_region_active(const LevyMeasureSpec& levy) {
  return levy.has_jumps() && levy.truncation_radius > 0.0;
}
inline bool large_region_active(const LevyMeasureSpec& levy) {
  return levy.has_jumps() && !std::isinf(levy.truncation_radius);
}

/**
 * Jump-part rate at time s of the expected-increment functional for g:
 * compensated small-jump term plus raw large-jump term, integrated over the
 * control cube and the size measure.
 */
template <typename G>
double psi_jump_rate(const TestFunctionBundle& bundle, G&& g, double g0, const Vec& grad0,
                     const LevyMeasureSpec& levy, double s, const UnitCubeRule& u_rule) {
  double total = 0.0;
  if (bundle.small_jump_map && small_region_active(levy)) {
    total += u_rule.integrate([&](const Vec& u) {
      return levy.integrate_z(
          s,
          [&](const Vec& z) {
            const double r = norm2(z);
            const Vec f = bundle.small_jump_map(s, z, u);
            Vec y(f.size());
            for (std::size_t i = 0; i < f.size(); ++i) y[i] = f[i] * r;
            double lin = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) lin += grad0[i] * f[i];
            return g(y) - g0 - r * lin;
          },
          JumpRegion::small);
    });
  }
  if (bundle.large_jump_map && large_region_active(levy)) {
    total += u_rule.integrate([&](const Vec& u) {
      return levy.integrate_z(
          s, [&](const Vec& z) { return g(bundle.large_jump_map(s, z, u)) - g0; },
          JumpRegion::large);
    });
  }
  return total;
}

}  // namespace detail

/**
 * Rate at time s of the expected increment of g over one vanishing partition
 * interval: the control-cube average of the first-order drift term and the
 * half-Hessian diffusion term at the origin, plus the compensated small-jump
 * and raw large-jump integrals.
 */
inline double psi(const TestFunctionBundle& bundle, const SmoothTestFunction& g,
                  const LevyMeasureSpec& levy, double s, const UnitCubeRule& u_rule) {
  g.validate(bundle.m);
  if (u_rule.dim != bundle.d)
    throw ConfigError("psi: control rule dimension must match the bundle");
  if (bundle.has_jump_maps() && levy.has_jumps() && bundle.levy_radius != levy.truncation_radius)
    throw ConfigError("psi: bundle and intensity measure disagree on the truncation radius");

  double total = 0.0;
  if (bundle.drift_map || !bundle.brownian_maps.empty()) {
    total += u_rule.integrate([&](const Vec& u) {
      double v = 0.0;
      if (bundle.drift_map) {
        const Vec f0 = bundle.drift_map(s, u);
        for (std::size_t k = 0; k < bundle.m; ++k) v += g.grad0[k] * f0[k];
      }
      for (const auto& map : bundle.brownian_maps) {
        const Vec fl = map(s, u);
        for (std::size_t k = 0; k < bundle.m; ++k)
          for (std::size_t k2 = 0; k2 < bundle.m; ++k2)
            v += 0.5 * g.hess0(k, k2) * fl[k] * fl[k2];
      }
      return v;
    });
  }
  const double g0 = g.value(Vec(bundle.m, 0.0));
  total += detail::psi_jump_rate(bundle, g.value, g0, g.grad0, levy, s, u_rule);
  return total;
}

/**
 * Time integral of psi over [t0, t1] by composite Gauss-Legendre quadrature
 * (panels of width at most max_panel).
 */
inline double psi_time_integral(const TestFunctionBundle& bundle, const SmoothTestFunction& g,
                                const LevyMeasureSpec& levy, const UnitCubeRule& u_rule,
                                double t0, double t1, double max_panel = 0.125,
                                std::size_t gl_order = 16) {
  if (!(t1 >= t0)) throw ConfigError("psi_time_integral: need t1 >= t0");
  if (!(max_panel > 0.0)) throw ConfigError("psi_time_integral: panel width must be > 0");
  const auto n_panels =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((t1 - t0) / max_panel)));
  double total = 0.0;
  for (std::size_t i = 0; i < n_panels; ++i) {
    const double a = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_panels);
    const double b = t0 + (t1 - t0) * static_cast<double>(i + 1) / static_cast<double>(n_panels);
    total += gl_integrate(a, b, [&](double s) { return psi(bundle, g, levy, s, u_rule); }, gl_order);
  }
  return total;
}

/**
 * The limit process's characteristics on a reporting grid: cumulative drift
 * curve, continuous second characteristic, its jump-modified version, and a
 * functional evaluating integrals of scalar fields against the limit jump
 * intensity (all by quadrature; nothing is simulated).
 */
struct CharacteristicsTriple {
  Partition grid{Partition::uniform(1.0, 1)};
  std::vector<Vec> drift;            // first characteristic at grid times
  std::vector<Mat> second;           // continuous second characteristic
  std::vector<Mat> modified_second;  // second + cumulative truncated-jump second moment
  std::function<double(const ScalarField&, double, double)> jump_integral;  // (g, t0, t1)

  /** Shape, symmetry and PSD-increment checks at the grid times. */
  void validate() const {
    const std::size_t n = grid.t.size();
    if (drift.size() != n || second.size() != n || modified_second.size() != n)
      throw ConfigError("CharacteristicsTriple: one curve sample per grid time required");
    for (std::size_t i = 0; i < n; ++i) {
      if (!all_finite(drift[i]) || !all_finite(second[i]) || !all_finite(modified_second[i]))
        throw NumericalError("CharacteristicsTriple: non-finite curve value");
      const Mat& c = modified_second[i];
      for (std::size_t r = 0; r < c.rows; ++r)
        for (std::size_t j = 0; j < r; ++j)
          if (std::abs(c(r, j) - c(j, r)) > 1e-10 * (1.0 + std::abs(c(r, j))))
            throw NumericalError("CharacteristicsTriple: modified second characteristic not symmetric");
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      Mat incr(modified_second[i].rows, modified_second[i].cols);
      for (std::size_t r = 0; r < incr.rows; ++r)
        for (std::size_t j = 0; j < incr.cols; ++j)
          incr(r, j) = modified_second[i + 1](r, j) - modified_second[i](r, j);
      psd_factor(incr);  // raises a numerical error on a materially negative eigenvalue
    }
  }
};

/**
 * Quadrature evaluation of the limit characteristics with respect to the
 * given truncation function, sampled cumulatively at the grid times.
 * Per-interval time quadrature of order time_gl_order; the jump functional
 * uses the same panels restricted to the requested window.
 */
inline CharacteristicsTriple limit_characteristics(const TestFunctionBundle& bundle,
                                                   const LevyMeasureSpec& levy,
                                                   const TruncationFunction& trunc,
                                                   const Partition& grid,
                                                   const UnitCubeRule& u_rule,
                                                   std::size_t time_gl_order = 8) {
  grid.validate();
  bundle.validate(levy, grid.horizon(), u_rule);

  const std::size_t m = bundle.m;
  const bool small_active = bundle.small_jump_map && detail::small_region_active(levy);
  const bool large_active = bundle.large_jump_map && detail::large_region_active(levy);

  // Rate of the drift curve at time s.
  auto drift_rate = [&, m](double s) {
    Vec rate(m, 0.0);
    if (bundle.drift_map) {
      const Vec avg = u_rule.integrate_vec([&](const Vec& u) { return bundle.drift_map(s, u); }, m);
      for (std::size_t k = 0; k < m; ++k) rate[k] += avg[k];
    }
    if (small_active) {
      const Vec corr = u_rule.integrate_vec(
          [&](const Vec& u) {
            Vec acc(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
              acc[k] = levy.integrate_z(
                  s,
                  [&](const Vec& z) {
                    const double r = norm2(z);
                    Vec y = bundle.small_jump_map(s, z, u);
                    for (double& c : y) c *= r;
                    return trunc.component(y, k) - y[k];
                  },
                  JumpRegion::small);
            }
            return acc;
          },
          m);
      for (std::size_t k = 0; k < m; ++k) rate[k] += corr[k];
    }
    if (large_active) {
      const Vec tail = u_rule.integrate_vec(
          [&](const Vec& u) {
            Vec acc(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
              acc[k] = levy.integrate_z(
                  s,
                  [&](const Vec& z) { return trunc.component(bundle.large_jump_map(s, z, u), k); },
                  JumpRegion::large);
            }
            return acc;
          },
          m);
      for (std::size_t k = 0; k < m; ++k) rate[k] += tail[k];
    }
    return rate;
  };

  // Rate of the continuous second characteristic (Brownian maps only).
  auto second_rate = [&, m](double s) {
    Mat rate(m, m);
    for (const auto& map : bundle.brownian_maps) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t k2 = 0; k2 <= k; ++k2) {
          const double v = u_rule.integrate([&](const Vec& u) {
            const Vec f = map(s, u);
            return f[k] * f[k2];
          });
          rate(k, k2) += v;
          if (k2 != k) rate(k2, k) += v;
        }
      }
    }
    return rate;
  };

  // Rate of the truncated-jump second moment added to the modified curve.
  auto truncated_jump_rate = [&, m](double s) {
    Mat rate(m, m);
    auto add_region = [&](const JumpControlField& map, bool scale_by_norm, JumpRegion region) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t k2 = 0; k2 <= k; ++k2) {
          const double v = u_rule.integrate([&](const Vec& u) {
            return levy.integrate_z(
                s,
                [&](const Vec& z) {
                  Vec y = map(s, z, u);
                  if (scale_by_norm) {
                    const double r = norm2(z);
                    for (double& c : y) c *= r;
                  }
                  return trunc.component(y, k) * trunc.component(y, k2);
                },
                region);
          });
          rate(k, k2) += v;
          if (k2 != k) rate(k2, k) += v;
        }
      }
    };
    if (small_active) add_region(bundle.small_jump_map, true, JumpRegion::small);
    if (large_active) add_region(bundle.large_jump_map, false, JumpRegion::large);
    return rate;
  };

  CharacteristicsTriple triple;
  triple.grid = grid;
  triple.drift.assign(grid.t.size(), Vec(m, 0.0));
  triple.second.assign(grid.t.size(), Mat(m, m));
  triple.modified_second.assign(grid.t.size(), Mat(m, m));
  for (std::size_t i = 0; i < grid.intervals(); ++i) {
    const double a = grid.t[i];
    const double b = grid.t[i + 1];
    Vec d_incr(m, 0.0);
    Mat c_incr(m, m), j_incr(m, m);
    const auto& [nodes, weights] = detail::gauss_legendre_cached(time_gl_order);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double s = mid + half * nodes[q];
      const double w = half * weights[q];
      const Vec dr = drift_rate(s);
      for (std::size_t k = 0; k < m; ++k) d_incr[k] += w * dr[k];
      const Mat cr = second_rate(s);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < m; ++c) c_incr(r, c) += w * cr(r, c);
      if (small_active || large_active) {
        const Mat jr = truncated_jump_rate(s);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < m; ++c) j_incr(r, c) += w * jr(r, c);
      }
    }
    for (std::size_t k = 0; k < m; ++k) triple.drift[i + 1][k] = triple.drift[i][k] + d_incr[k];
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) {
        triple.second[i + 1](r, c) = triple.second[i](r, c) + c_incr(r, c);
        triple.modified_second[i + 1](r, c) =
            triple.modified_second[i](r, c) + c_incr(r, c) + j_incr(r, c);
      }
    }
  }

  // Integrals against the limit jump intensity: push the size measure through
  // the jump maps (small sizes scaled by |z|) and integrate g of the image.
  triple.jump_integral = [bundle, levy, u_rule, time_gl_order, small_active, large_active](
                             const ScalarField& g, double t0, double t1) {
    if (!(t1 >= t0)) throw ConfigError("CharacteristicsTriple: need t1 >= t0 in jump_integral");
    if (!(small_active || large_active) || t1 == t0) return 0.0;
    auto rate = [&](double s) {
      double v = 0.0;
      if (small_active) {
        v += u_rule.integrate([&](const Vec& u) {
          return levy.integrate_z(
              s,
              [&](const Vec& z) {
                const double r = norm2(z);
                Vec y = bundle.small_jump_map(s, z, u);
                for (double& c : y) c *= r;
                return g(y);
              },
              JumpRegion::small);
        });
      }
      if (large_active) {
        v += u_rule.integrate([&](const Vec& u) {
          return levy.integrate_z(
              s, [&](const Vec& z) { return g(bundle.large_jump_map(s, z, u)); },
              JumpRegion::large);
        });
      }
      return v;
    };
    const auto n_panels =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((t1 - t0) / 0.125)));
    double total = 0.0;
    for (std::size_t i = 0; i < n_panels; ++i) {
      const double a = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_panels);
      const double b = t0 + (t1 - t0) * static_cast<double>(i + 1) / static_cast<double>(n_panels);
      total += gl_integrate(a, b, rate, time_gl_order);
    }
    return total;
  };
  return triple;
}

/**
 * Closed-form upper bound on the jump-intensity mass of {|y| >= kappa} over
 * [0, horizon], from the declared sup-norms of the jump maps: the small-jump
 * image exceeds kappa only where (sup_small * |z|)^2 >= kappa^2, bounded by
 * Chebyshev against the size second moment; the large-jump image is bounded
 * by Markov against the region mass.
 */
inline double nu_tail_upper_bound(const TestFunctionBundle& bundle, const LevyMeasureSpec& levy,
                                  double horizon, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("nu_tail_upper_bound: kappa must be > 0");
  double bound = 0.0;
  if (bundle.small_jump_map && detail::small_region_active(levy)) {
    const double second_moment = gl_integrate(0.0, horizon, [&](double s) {
      return levy.integrate_z(s, [](const Vec& z) { return dot(z, z); }, JumpRegion::small);
    });
    bound += bundle.sup_small * bundle.sup_small / (kappa * kappa) * second_moment;
  }
  if (bundle.large_jump_map && detail::large_region_active(levy)) {
    const double mass = gl_integrate(0.0, horizon, [&](double s) {
      return levy.integrate_z(s, [](const Vec&) { return 1.0; }, JumpRegion::large);
    });
    bound += bundle.sup_large / kappa * mass;
  }
  return bound;
}

/** Monte-Carlo estimate with its standard error. */
struct TriangularArrayEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/** Settings for the per-interval pre-limit simulation. */
struct PreLimitSimConfig {
  std::size_t n_paths = 1000;
  std::size_t substeps = 8;  // Euler substeps per partition interval
  std::uint64_t master_seed = 0;
};

/**
 * Sum over partition intervals of E[g(interval increment)], each interval
 * simulated independently with fresh control draw, Brownian increments and
 * jump events (the increments of distinct intervals are independent by
 * construction, so the variance of the sum is the sum of variances).
 */
inline TriangularArrayEstimate triangular_sum(const TestFunctionBundle& bundle,
                                              const ScalarField& g, const Partition& partition,
                                              const LevyMeasureSpec& levy,
                                              const PreLimitSimConfig& cfg) {
  partition.validate();
  if (!g) throw ConfigError("triangular_sum: test function required");
  if (cfg.n_paths < 2) throw ConfigError("triangular_sum: need at least two paths");
  if (cfg.substeps == 0) throw ConfigError("triangular_sum: need at least one substep");
  const std::size_t m = bundle.m;
  const bool small_active = bundle.small_jump_map && detail::small_region_active(levy);
  const bool large_active = bundle.large_jump_map && detail::large_region_active(levy);
  const double radius = levy.truncation_radius;

  TriangularArrayEstimate result;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < partition.intervals(); ++i) {
    const double t0 = partition.t[i];
    const double t1 = partition.t[i + 1];
    const double delta = (t1 - t0) / static_cast<double>(cfg.substeps);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < cfg.n_paths; ++j) {
      const std::uint64_t idx = i * cfg.n_paths + j;
      Vec xi(bundle.d);
      {
        auto stream = derive_stream(SeedSpec{cfg.master_seed, "xi", idx});
        for (double& c : xi) c = stream.uniform();
      }
      Vec incr(m, 0.0);
      if (bundle.drift_map) {
        for (std::size_t k = 0; k < cfg.substeps; ++k) {
          const Vec f0 = bundle.drift_map(t0 + static_cast<double>(k) * delta, xi);
          for (std::size_t r = 0; r < m; ++r) incr[r] += f0[r] * delta;
        }
      }
      if (!bundle.brownian_maps.empty()) {
        auto stream = derive_stream(SeedSpec{cfg.master_seed, "bm", idx});
        const double sd = std::sqrt(delta);
        for (std::size_t k = 0; k < cfg.substeps; ++k) {
          const double s = t0 + static_cast<double>(k) * delta;
          for (const auto& map : bundle.brownian_maps) {
            const double db = sd * stream.normal();
            const Vec fl = map(s, xi);
            for (std::size_t r = 0; r < m; ++r) incr[r] += fl[r] * db;
          }
        }
      }
      if (small_active || large_active) {
        auto stream = derive_stream(SeedSpec{cfg.master_seed, "jump", idx});
        const auto events = sample_poisson_measure(levy, t0, t1, stream);
        for (const auto& event : events) {
          const double r_z = norm2(event.z);
          if (r_z <= radius) {
            if (!small_active) continue;
            const Vec f = bundle.small_jump_map(event.t, event.z, xi);
            for (std::size_t r = 0; r < m; ++r) incr[r] += f[r] * r_z;
          } else if (large_active) {
            const Vec f = bundle.large_jump_map(event.t, event.z, xi);
            for (std::size_t r = 0; r < m; ++r) incr[r] += f[r];
          }
        }
        if (small_active) {
          for (std::size_t k = 0; k < cfg.substeps; ++k) {
            const double s = t0 + static_cast<double>(k) * delta;
            for (std::size_t r = 0; r < m; ++r) {
              incr[r] -= delta * levy.integrate_z(
                                     s,
                                     [&](const Vec& z) {
                                       return bundle.small_jump_map(s, z, xi)[r] * norm2(z);
                                     },
                                     JumpRegion::small);
            }
          }
        }
      }
      if (!all_finite(incr)) throw NumericalError("triangular_sum: non-finite increment");
      const double val = g(incr);
      const double d1 = val - mean;
      mean += d1 / static_cast<double>(j + 1);
      m2 += d1 * (val - mean);
    }
    result.estimate += mean;
    var_sum += m2 / static_cast<double>(cfg.n_paths - 1) / static_cast<double>(cfg.n_paths);
  }
  result.std_error = std::sqrt(var_sum);
  return result;
}

/** One row of the mesh-refinement error table. */
struct ConvergenceRow {
  std::size_t mesh_n = 0;
  double estimate = 0.0;
  double target = 0.0;
  double abs_error = 0.0;
  double mc_se = 0.0;
};

/** Mesh-refinement study of the triangular sums against the quadrature target. */
struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double target = 0.0;   // g(0) + time integral of psi
  bool monotone_trend = false;
};

/**
 * For each mesh, the triangular sum over the uniform partition with that many
 * intervals, compared against g(0) + the time integral of psi. The trend flag
 * reports whether the error sequence is non-increasing up to three combined
 * standard errors at every refinement.
 */
inline ConvergenceReport convergence_report(const TestFunctionBundle& bundle,
                                            const SmoothTestFunction& g, double horizon,
                                            const std::vector<std::size_t>& meshes,
                                            const LevyMeasureSpec& levy,
                                            const UnitCubeRule& u_rule,
                                            const PreLimitSimConfig& cfg) {
  if (meshes.empty()) throw ConfigError("convergence_report: need at least one mesh");
  for (std::size_t j = 0; j + 1 < meshes.size(); ++j)
    if (meshes[j + 1] <= meshes[j])
      throw ConfigError("convergence_report: meshes must be strictly increasing");
  ConvergenceReport report;
  report.target = g.value(Vec(bundle.m, 0.0)) +
                  psi_time_integral(bundle, g, levy, u_rule, 0.0, horizon);
  for (const std::size_t n : meshes) {
    const auto partition = Partition::uniform(horizon, n);
    const auto est = triangular_sum(bundle, g.value, partition, levy, cfg);
    ConvergenceRow row;
    row.mesh_n = n;
    row.estimate = est.estimate;
    row.target = report.target;
    row.abs_error = std::abs(est.estimate - report.target);
    row.mc_se = est.std_error;
    report.rows.push_back(row);
  }
  report.monotone_trend = true;
  for (std::size_t j = 0; j + 1 < report.rows.size(); ++j) {
    const auto& a = report.rows[j];
    const auto& b = report.rows[j + 1];
    if (b.abs_error > a.abs_error + 3.0 * (a.mc_se + b.mc_se)) report.monotone_trend = false;
  }
  return report;
}

/** A labeled scalar functional of the K joint path records of one realization. */
struct MomentFunctional {
  std::string label;
  std::function<double(const std::vector<PathRecord>&)> eval;
};

/** Functional reading phi of system k's state at a reporting time. */
inline MomentFunctional state_moment(std::string label, double t, std::size_t system,
                                     ScalarField phi) {
  MomentFunctional f;
  f.label = std::move(label);
  f.eval = [t, system, phi = std::move(phi)](const std::vector<PathRecord>& records) {
    return phi(records.at(system).state_at(t));
  };
  return f;
}

/** Functional evaluating the realized covariation between two systems. */
inline MomentFunctional pair_covariation_moment(std::string label, std::size_t a, std::size_t b) {
  MomentFunctional f;
  f.label = std::move(label);
  f.eval = [a, b](const std::vector<PathRecord>& records) {
    return realized_covariation(records.at(a), records.at(b));
  };
  return f;
}

/** One row of the solver-comparison table. */
struct MomentComparisonRow {
  std::string label;
  double grid_mean = 0.0;
  double grid_se = 0.0;
  double limit_mean = 0.0;
  double limit_se = 0.0;
  double abs_diff = 0.0;
  double pooled_se = 0.0;
};

/**
 * Expectations of path functionals under the grid-sampling solver and under
 * the limit solver, with Monte-Carlo standard errors and their pooled value.
 * The two solvers use independent sub-seeds of the master seed.
 */
inline std::vector<MomentComparisonRow> moment_compare(
    const JumpDiffusionModel& model, const std::vector<RandomizedPolicy>& policies,
    const SolverConfig& config, const std::vector<MomentFunctional>& functionals,
    std::size_t n_paths, std::uint64_t master_seed) {
  if (functionals.empty()) throw ConfigError("moment_compare: need at least one functional");
  if (n_paths < 2) throw ConfigError("moment_compare: need at least two paths");
  const std::uint64_t grid_seed = derive_seed(master_seed, "mc", 0);
  const std::uint64_t limit_seed = derive_seed(master_seed, "mc", 1);

  const LimitCoefficientTable* table_ptr = nullptr;
  LimitCoefficientTable table;
  if (model.state_independent_coeffs) {
    table = prepare_limit_coefficients(model, policies, config);
    table_ptr = &table;
  }

  const std::size_t n_fn = functionals.size();
  std::vector<double> g_mean(n_fn, 0.0), g_m2(n_fn, 0.0), l_mean(n_fn, 0.0), l_m2(n_fn, 0.0);
  auto accumulate = [&](std::vector<double>& mean, std::vector<double>& m2,
                        const std::vector<PathRecord>& records, std::size_t count) {
    for (std::size_t f = 0; f < n_fn; ++f) {
      const double val = functionals[f].eval(records);
      const double d1 = val - mean[f];
      mean[f] += d1 / static_cast<double>(count);
      m2[f] += d1 * (val - mean[f]);
    }
  };
  for (std::size_t i = 0; i < n_paths; ++i) {
    accumulate(g_mean, g_m2, solve_grid_sampling(model, policies, config, grid_seed, i), i + 1);
    accumulate(l_mean, l_m2,
               solve_limit_joint(model, policies, config, limit_seed, i, table_ptr), i + 1);
  }

  std::vector<MomentComparisonRow> rows(n_fn);
  const double denom = static_cast<double>(n_paths - 1) * static_cast<double>(n_paths);
  for (std::size_t f = 0; f < n_fn; ++f) {
    rows[f].label = functionals[f].label;
    rows[f].grid_mean = g_mean[f];
    rows[f].grid_se = std::sqrt(g_m2[f] / denom);
    rows[f].limit_mean = l_mean[f];
    rows[f].limit_se = std::sqrt(l_m2[f] / denom);
    rows[f].abs_diff = std::abs(g_mean[f] - l_mean[f]);
    rows[f].pooled_se = std::sqrt(rows[f].grid_se * rows[f].grid_se +
                                  rows[f].limit_se * rows[f].limit_se);
  }
  return rows;
}

}  // namespace gridrl
