#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dtm {

/// Worker count used when a caller passes threads <= 0.
inline int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(i) for i in [begin, end) split into contiguous ranges across threads.
/// Results must not depend on the split; callers key randomness by index.
template <typename Fn>
void parallel_for(long begin, long end, int threads, Fn&& fn) {
  if (threads <= 0) threads = default_threads();
  const long n = end - begin;
  if (n <= 0) return;
  if (threads == 1 || n == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  const long workers = std::min<long>(threads, n);
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (long w = 0; w < workers; ++w) {
      const long lo = begin + n * w / workers;
      const long hi = begin + n * (w + 1) / workers;
      pool.emplace_back([&, lo, hi] {
        try {
          for (long i = lo; i < hi; ++i) fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace dtm
