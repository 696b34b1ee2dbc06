#pragma once

/**
 * Reproducible randomness: counter-style stream derivation from a master seed,
 * a distribution layer with implementation-pinned algorithms, and the
 * grid-sampling randomization process (i.i.d. uniforms attached to partition
 * intervals, carried on half-open intervals).
 *
 * Distributions are implemented in-repo on top of std::mt19937_64 raw output
 * because the algorithms behind std::normal_distribution and friends are
 * implementation-defined; pinning them keeps every simulation bit-reproducible
 * across standard libraries.
 */

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "gridrl/core.hpp"

namespace gridrl {

/** Finalizer with good avalanche behaviour, used to whiten derived seeds. */
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/**
 * Identifies one logical random stream: a master seed plus a (purpose, index)
 * stream id. Distinct ids give statistically independent streams; equal ids
 * reproduce the identical draw sequence.
 */
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::string purpose;
  std::uint64_t index = 0;
};

/** Deterministic stream-seed derivation: hash(master, purpose, index), whitened. */
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                 std::uint64_t index) {
  std::uint64_t h = fnv1a64(&master, sizeof(master));
  h = fnv1a64(purpose.data(), purpose.size(), h);
  h = fnv1a64(&index, sizeof(index), h);
  return splitmix64(h);
}

/**
 * Single-owner random stream. Not thread-safe by design: each simulation task
 * derives and owns its streams, which is what makes path-parallel runs
 * schedule-independent.
 */
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}
  explicit Stream(const SeedSpec& spec)
      : eng_(derive_seed(spec.master_seed, spec.purpose, spec.index)) {}

  /** Uniform on [0, 1) with 53-bit resolution. */
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /** Uniform on the open interval (0, 1). */
  double uniform_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /** Uniform on [lo, hi). */
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /** Standard normal via the inverse CDF (one raw draw per variate). */
  double normal() { return inverse_normal_cdf(uniform_open()); }

  /** Exponential with the given rate. */
  double exponential(double rate) {
    if (!(rate > 0.0)) throw ConfigError("Stream::exponential: rate must be > 0");
    return -std::log(1.0 - uniform()) / rate;
  }

  /**
   * Poisson count by summing unit-rate exponential inter-arrivals until the
   * mean is exceeded. Exact, O(mean) expected draws; means in this toolkit
   * are O(1)-O(100).
   */
  std::uint64_t poisson(double mean) {
    if (mean < 0.0) throw ConfigError("Stream::poisson: mean must be >= 0");
    if (mean == 0.0) return 0;
    std::uint64_t count = 0;
    double acc = 0.0;
    for (;;) {
      acc += -std::log(1.0 - uniform());
      if (acc > mean) return count;
      ++count;
    }
  }

  /** Raw 64-bit engine output (used by shuffling / discrete choices). */
  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

inline Stream derive_stream(const SeedSpec& spec) { return Stream(spec); }

/**
 * A partition together with the i.i.d. uniform draws xi_1..xi_n in [0,1]^d
 * defining the piecewise-constant, left-continuous randomization process:
 * the value on the half-open interval (t_{i-1}, t_i] is xi_i.
 */
struct RandomizationDraw {
  Partition partition;
  std::vector<Vec> xi;  // xi[i-1] is the draw for interval i

  [[nodiscard]] std::size_t dim() const { return xi.empty() ? 0 : xi.front().size(); }

  /** Draw attached to interval i (1-based). */
  [[nodiscard]] const Vec& value_on_interval(std::size_t i) const {
    if (i == 0 || i > xi.size()) throw ConfigError("RandomizationDraw: interval index out of range");
    return xi[i - 1];
  }

  /** Step-process value at time s in (0, horizon]: xi_i for s in (t_{i-1}, t_i]. */
  [[nodiscard]] const Vec& lookup(double s) const {
    return xi[partition.interval_containing(s) - 1];
  }
};

/** Draw the n i.i.d. uniforms on [0,1]^d attached to the partition intervals. */
inline RandomizationDraw sample_grid_randomization(const Partition& partition, std::size_t d,
                                                   Stream& stream) {
  if (d == 0) throw ConfigError("sample_grid_randomization: control dimension must be >= 1");
  RandomizationDraw draw;
  draw.partition = partition;
  draw.xi.resize(partition.intervals());
  for (auto& point : draw.xi) {
    point.resize(d);
    for (double& c : point) c = stream.uniform();
  }
  return draw;
}

inline RandomizationDraw sample_grid_randomization(const Partition& partition, std::size_t d,
                                                   const SeedSpec& seed) {
  Stream stream(seed);
  return sample_grid_randomization(partition, d, stream);
}

}  // namespace gridrl
