#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace sie {

/// Explicit request first, then SIE_THREADS, then 1. Values below 1 are treated as 1.
inline int resolve_threads(std::optional<int> requested) {
  if (requested) return *requested < 1 ? 1 : *requested;
  if (const char* env = std::getenv("SIE_THREADS")) {
    try {
      const int n = std::stoi(env);
      return n < 1 ? 1 : n;
    } catch (const std::exception&) {
      return 1;
    }
  }
  return 1;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must write to disjoint
/// outputs. The first exception thrown by any item is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(count);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sie
