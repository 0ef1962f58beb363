#pragma once

#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace qp {

inline std::size_t default_workers() {
  if (const char* env = std::getenv("QP_WORKERS")) {
    long v = std::atol(env);
    if (v >= 1) return std::size_t(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs fn(i) for i in [0, n). Results that must be order-independent are the
// caller's responsibility (write into per-index slots, reduce in index order).
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (workers > n) workers = n;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([=] {
      // Contiguous chunks: worker count never changes which fn(i) runs.
      std::size_t lo = n * w / workers;
      std::size_t hi = n * (w + 1) / workers;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

} // namespace qp
