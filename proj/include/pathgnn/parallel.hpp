#pragma once

// Deterministic work splitting. Each index writes only to its own output
// slot, so thread count never changes results, only wall time.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pathgnn {

/// Runs fn(i) for i in [0, count) across up to n_threads workers on disjoint
/// contiguous ranges. n_threads <= 1 runs inline. The first exception thrown
/// by any worker is rethrown after all workers join.
inline void parallel_for(std::size_t count, int n_threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers = std::min<std::size_t>(
      count, n_threads <= 1 ? 1 : static_cast<std::size_t>(n_threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    pool.emplace_back([&, lo, hi, w] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pathgnn
