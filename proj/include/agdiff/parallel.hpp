#pragma once

// Deterministic chunked parallel loops. Work is split into contiguous index
// ranges; every index is processed by exactly the same arithmetic regardless
// of the worker count, so per-index results never depend on scheduling.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace agdiff {

namespace detail {
inline thread_local int inner_thread_override = 0;
}

/// Worker cap from AGDIFF_THREADS, falling back to the hardware concurrency.
inline int configured_threads() {
  if (detail::inner_thread_override > 0) return detail::inner_thread_override;
  if (const char* env = std::getenv("AGDIFF_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Pins the worker count seen by parallel_for on the current thread while in scope.
class ScopedThreadLimit {
public:
  explicit ScopedThreadLimit(int n) : saved_(detail::inner_thread_override) {
    detail::inner_thread_override = n;
  }
  ~ScopedThreadLimit() { detail::inner_thread_override = saved_; }
  ScopedThreadLimit(const ScopedThreadLimit&) = delete;
  ScopedThreadLimit& operator=(const ScopedThreadLimit&) = delete;

private:
  int saved_;
};

/// Calls fn(begin, end) over [0, n) split into contiguous chunks. Runs inline
/// when the work is below min_parallel or only one worker is available.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t min_parallel = 256) {
  const int workers = configured_threads();
  if (workers <= 1 || n < min_parallel) {
    fn(std::size_t{0}, n);
    return;
  }
  const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  const std::size_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(chunks);
  pool.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    const std::size_t b = c * per;
    const std::size_t e = std::min(n, b + per);
    if (b >= e) break;
    pool.emplace_back([&fn, &errors, c, b, e] {
      ScopedThreadLimit single(1);
      try {
        fn(b, e);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  {
    ScopedThreadLimit single(1);
    try {
      fn(std::size_t{0}, std::min(n, per));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& t : pool) t.join();
  // lowest chunk first, so the reported error does not depend on timing
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

} // namespace agdiff
