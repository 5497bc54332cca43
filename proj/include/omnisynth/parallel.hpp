#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace omnisynth {

/// Number of workers to use for a thread-count hint; 0 means hardware
/// concurrency.
inline unsigned resolve_threads(unsigned hint) {
  if (hint != 0) return hint;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) over `threads` workers using static
/// interleaved chunks. fn must only write state owned by index i, which keeps
/// results independent of scheduling.
template <typename Fn>
void parallel_for(int n, unsigned threads, Fn&& fn) {
  const unsigned workers = std::min<unsigned>(resolve_threads(threads), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace omnisynth
