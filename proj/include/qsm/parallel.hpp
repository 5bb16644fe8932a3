#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qsm {

namespace detail {
inline std::atomic<unsigned>& worker_override() {
  static std::atomic<unsigned> n{0};
  return n;
}
}  // namespace detail

/// Number of workers used by parallel_for. Defaults to QSM_THREADS or the
/// hardware concurrency.
inline unsigned worker_count() {
  if (unsigned n = detail::worker_override().load()) return n;
  if (const char* env = std::getenv("QSM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// 0 restores the default.
inline void set_worker_count(unsigned n) { detail::worker_override().store(n); }

/// Runs fn(i) for i in [0, n). Each index is processed by exactly one worker,
/// so results that depend only on i are independent of the worker count.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace qsm
