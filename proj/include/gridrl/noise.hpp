#pragma once

/**
 * Driving noise: Brownian increments on a partition, marked Poisson jump
 * events sampled by thinning, the policy-averaged effective covariance of
 * the joint limit dynamics, and a white-noise cell realization used to
 * validate contractions of the control-noise measures against orthonormal
 * shape functions.
 *
 * Eigen is used in this header only, for the symmetric eigendecomposition
 * behind the positive-semidefinite factorization.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/core.hpp"
#include "gridrl/model.hpp"
#include "gridrl/quadrature.hpp"
#include "gridrl/rng.hpp"

namespace gridrl {

/**
 * One atom of the driving jump measure: its time, its size mark z, and the
 * uniform control mark u (empty until attached by one of the mark policies).
 */
struct JumpEvent {
  double t = 0.0;
  Vec z;
  Vec u;
};

/** Brownian increments on a partition: dB[k][l] for step k+1, component l. */
struct BrownianPanel {
  Partition grid;
  std::size_t p = 0;
  std::vector<Vec> dB;

  void validate() const {
    if (dB.size() != grid.intervals())
      throw ConfigError("BrownianPanel: increment count does not match the grid");
    for (const auto& row : dB)
      if (row.size() != p) throw ConfigError("BrownianPanel: wrong increment dimension");
  }
};

/** Independent N(0, dt_k) increments for each step and component. */
inline BrownianPanel sample_brownian(const Partition& grid, std::size_t p, Stream& stream) {
  if (p == 0) throw ConfigError("sample_brownian: Brownian dimension must be >= 1");
  BrownianPanel panel;
  panel.grid = grid;
  panel.p = p;
  panel.dB.resize(grid.intervals(), Vec(p));
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    const double sd = std::sqrt(grid.t[k + 1] - grid.t[k]);
    for (std::size_t l = 0; l < p; ++l) panel.dB[k][l] = sd * stream.normal();
  }
  return panel;
}

inline BrownianPanel sample_brownian(const Partition& grid, std::size_t p, const SeedSpec& spec) {
  auto stream = derive_stream(spec);
  return sample_brownian(grid, p, stream);
}

/**
 * Sample the atoms of the jump measure on (t0, t1] by thinning: candidate
 * times are a Poisson(rate_bound * (t1 - t0)) process, each kept with
 * probability rate(t)/rate_bound, each accepted atom gets a size draw.
 * Events come back sorted by time with empty control marks. The two-argument
 * overload samples on (0, horizon].
 */
inline std::vector<JumpEvent> sample_poisson_measure(const LevyMeasureSpec& levy, double t0,
                                                     double t1, Stream& stream) {
  if (!(t1 > t0)) throw ConfigError("sample_poisson_measure: need t1 > t0");
  std::vector<JumpEvent> events;
  if (!levy.has_jumps()) return events;
  const auto n_candidates = stream.poisson(levy.rate_bound * (t1 - t0));
  std::vector<double> times(n_candidates);
  for (auto& t : times) t = t0 + (t1 - t0) * stream.uniform_open();
  std::sort(times.begin(), times.end());
  for (const double t : times) {
    const double keep = levy.rate(t) / levy.rate_bound;
    if (stream.uniform() < keep) {
      JumpEvent event;
      event.t = t;
      event.z = levy.sample_jump_size(t, stream);
      if (event.z.empty() || !all_finite(event.z))
        throw NumericalError("sample_poisson_measure: bad size mark at t=" + std::to_string(t));
      events.push_back(std::move(event));
    }
  }
  return events;
}

inline std::vector<JumpEvent> sample_poisson_measure(const LevyMeasureSpec& levy, double horizon,
                                                     Stream& stream) {
  return sample_poisson_measure(levy, 0.0, horizon, stream);
}

/** Attach i.i.d. uniform control marks on [0,1]^d to each event (limit dynamics). */
inline void attach_uniform_marks_limit(std::vector<JumpEvent>& events, std::size_t d,
                                       Stream& stream) {
  if (d == 0) throw ConfigError("attach_uniform_marks_limit: mark dimension must be >= 1");
  for (auto& event : events) {
    event.u.resize(d);
    for (double& c : event.u) c = stream.uniform();
  }
}

/**
 * Attach the grid-randomization mark to each event: the draw of the
 * partition interval containing the event time. Event times outside (0, T]
 * are input errors.
 */
inline void attach_grid_marks(std::vector<JumpEvent>& events, const RandomizationDraw& draw) {
  for (auto& event : events) event.u = draw.lookup(event.t);
}

/**
 * Effective covariance of K jointly driven systems at time t: the
 * (K*m) x (K*m) matrix with m x m blocks
 *   block(k, j) = integral over u of a(t, x_k, h_k(t, x_k, u))
 *                                  * a(t, x_j, h_j(t, x_j, u))^T du,
 * the common-noise average of the diffusion outer products. Symmetric and
 * positive semidefinite by construction (it is an integral of Gram blocks).
 */
inline Mat effective_covariance(const JumpDiffusionModel& model,
                                const std::vector<RandomizedPolicy>& policies, double t,
                                const std::vector<Vec>& states, const UnitCubeRule& rule) {
  const std::size_t kCount = policies.size();
  if (kCount == 0) throw ConfigError("effective_covariance: need at least one policy");
  if (states.size() != kCount)
    throw ConfigError("effective_covariance: one state per policy required");
  const std::size_t m = model.dims.m;
  if (rule.dim != model.dims.d)
    throw ConfigError("effective_covariance: quadrature rule dimension must match the mark dimension");

  Mat sigma(kCount * m, kCount * m);
  std::vector<Mat> diffusion(kCount, Mat(0, 0));
  for (std::size_t node = 0; node < rule.nodes.size(); ++node) {
    const Vec& u = rule.nodes[node];
    const double w = rule.weights[node];
    for (std::size_t k = 0; k < kCount; ++k) {
      diffusion[k] = model.a(t, states[k], policies[k].h(t, states[k], u));
      if (diffusion[k].rows != m || diffusion[k].cols != model.dims.p)
        throw ConfigError("effective_covariance: diffusion output has wrong shape");
    }
    for (std::size_t k = 0; k < kCount; ++k) {
      for (std::size_t j = 0; j <= k; ++j) {
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < m; ++c) {
            double acc = 0.0;
            for (std::size_t l = 0; l < model.dims.p; ++l)
              acc += diffusion[k](r, l) * diffusion[j](c, l);
            sigma(k * m + r, j * m + c) += w * acc;
          }
        }
      }
    }
  }
  // Mirror the lower-triangular blocks and symmetrize the diagonal ones.
  for (std::size_t i = 0; i < sigma.rows; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double avg = 0.5 * (sigma(i, j) + sigma(j, i));
      const std::size_t bi = i / m, bj = j / m;
      sigma(i, j) = (bi == bj) ? avg : sigma(i, j);
      sigma(j, i) = (bi == bj) ? avg : sigma(i, j);
    }
  }
  if (!all_finite(sigma)) throw NumericalError("effective_covariance: non-finite entries");
  return sigma;
}

/**
 * Factor a symmetric positive-semidefinite matrix as S = L L^T via its
 * eigendecomposition. Eigenvalues in [-1e-8 * trace, 0) are treated as
 * roundoff and clamped to zero; anything more negative means S is not a
 * covariance and raises a numerical error.
 */
inline Mat psd_factor(const Mat& s) {
  if (s.rows != s.cols) throw ConfigError("psd_factor: matrix must be square");
  const auto n = static_cast<Eigen::Index>(s.rows);
  Eigen::MatrixXd sym(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sym(i, j) = s(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  sym = 0.5 * (sym + sym.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("psd_factor: eigendecomposition failed");
  const Eigen::VectorXd eigs = solver.eigenvalues();
  const double trace = std::max(sym.trace(), 0.0);
  const double gate = -1e-8 * std::max(trace, 1e-300);
  Eigen::VectorXd roots(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (eigs(i) < gate)
      throw NumericalError("psd_factor: eigenvalue " + std::to_string(eigs(i)) +
                           " is negative beyond the roundoff gate");
    roots(i) = std::sqrt(std::max(eigs(i), 0.0));
  }
  const Eigen::MatrixXd factor = solver.eigenvectors() * roots.asDiagonal();
  Mat out(s.rows, s.cols);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = factor(i, j);
  return out;
}

/** Scalar shape functions of the control mark, u in [0,1]. */
using ShapeFn = std::function<double(double)>;

/**
 * The first `count` (at most 3) non-constant shifted Legendre polynomials,
 * normalized to unit L2 norm on [0,1]: sqrt(3)(2u-1), sqrt(5)(6u^2-6u+1),
 * sqrt(7)(20u^3-30u^2+12u-1). Orthonormal, mean zero.
 */
inline std::vector<ShapeFn> make_eta_legendre(std::size_t count) {
  if (count == 0 || count > 3) throw ConfigError("make_eta_legendre: count must be 1..3");
  std::vector<ShapeFn> eta;
  eta.push_back([](double u) { return std::sqrt(3.0) * (2.0 * u - 1.0); });
  if (count >= 2)
    eta.push_back([](double u) { return std::sqrt(5.0) * ((6.0 * u - 6.0) * u + 1.0); });
  if (count >= 3)
    eta.push_back([](double u) {
      return std::sqrt(7.0) * (((20.0 * u - 30.0) * u + 12.0) * u - 1.0);
    });
  return eta;
}

/**
 * Per-step increments of the processes obtained by contracting the
 * control-noise measures of the p Brownian directions against shape
 * functions eta_r, realized from first principles: the mark space [0,1] is
 * split into `cells` equal cells, each step of each direction gets
 * independent N(0, dt/cells) white-noise masses per cell, and the (r, l)
 * increment is the sum of eta_r(cell midpoint) times the cell mass. No
 * covariance shortcut is involved, so these increments provide an
 * independent check that such contractions behave as standard Brownian
 * motions when the shapes are orthonormal.
 */
struct ContractedNoisePanel {
  Partition grid;
  std::size_t shapes = 0, p = 0;
  std::vector<Vec> increments;  // per step; component r * p + l

  [[nodiscard]] double increment(std::size_t step, std::size_t r, std::size_t l) const {
    return increments[step][r * p + l];
  }
};

inline ContractedNoisePanel simulate_contracted_noise(const std::vector<ShapeFn>& eta,
                                                      std::size_t p, const Partition& grid,
                                                      std::size_t cells, Stream& stream) {
  if (eta.empty()) throw ConfigError("simulate_contracted_noise: need at least one shape");
  if (p == 0) throw ConfigError("simulate_contracted_noise: need p >= 1");
  if (cells < 2) throw ConfigError("simulate_contracted_noise: need at least 2 cells");
  ContractedNoisePanel panel;
  panel.grid = grid;
  panel.shapes = eta.size();
  panel.p = p;
  panel.increments.resize(grid.intervals(), Vec(eta.size() * p, 0.0));

  Vec shape_at_mid(eta.size() * cells);
  for (std::size_t v = 0; v < cells; ++v) {
    const double mid = (static_cast<double>(v) + 0.5) / static_cast<double>(cells);
    for (std::size_t r = 0; r < eta.size(); ++r)
      shape_at_mid[r * cells + v] = eta[r](mid);
  }
  for (std::size_t k = 0; k < grid.intervals(); ++k) {
    const double sd = std::sqrt((grid.t[k + 1] - grid.t[k]) / static_cast<double>(cells));
    for (std::size_t l = 0; l < p; ++l) {
      for (std::size_t v = 0; v < cells; ++v) {
        const double mass = sd * stream.normal();
        for (std::size_t r = 0; r < eta.size(); ++r)
          panel.increments[k][r * p + l] += shape_at_mid[r * cells + v] * mass;
      }
    }
  }
  return panel;
}

}  // namespace gridrl
