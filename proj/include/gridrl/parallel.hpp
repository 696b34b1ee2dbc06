#pragma once

/**
 * Deterministic path-level parallelism. Work items are indexed; each index
 * derives its own random streams and writes into its own output slot, so a
 * reduction that afterwards walks the slots in index order produces the same
 * result for every worker count. That fixed-order contract is what makes
 * `--threads` a pure throughput knob.
 */

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "gridrl/core.hpp"

namespace gridrl {

/**
 * Run body(i) for i in [0, n) on up to n_threads workers. Indices are pulled
 * from a shared counter, so the schedule is dynamic but the work done per
 * index is not: body must depend only on i (and write only to slot i of any
 * shared output). The first exception thrown by any worker is rethrown on
 * the caller after all workers stop picking up new work. n_threads <= 1 runs
 * inline.
 */
inline void parallel_for(std::size_t n, std::size_t n_threads,
                         const std::function<void(std::size_t)>& body) {
  if (!body) throw ConfigError("parallel_for: body required");
  if (n_threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min(n_threads, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<bool> stop{false};

  auto run = [&]() {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace gridrl
