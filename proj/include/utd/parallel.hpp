#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace utd {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

// Upper bound on worker threads; 0 means hardware concurrency.
inline void set_max_threads(unsigned threads) { detail::thread_cap().store(threads); }

inline unsigned max_threads() {
  unsigned cap = detail::thread_cap().load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : cap;
}

// Samples per block, independent of the worker count.
inline constexpr std::size_t kBlockSize = 256;

// Calls fn(begin, end) for consecutive blocks of [0, count). Block
// boundaries depend only on count and block; workers pull blocks in any
// order, so fn must write only to its own slice.
template <typename Fn>
void for_each_block(std::size_t count, std::size_t block, Fn&& fn) {
  if (count == 0) return;
  const std::size_t blocks = (count + block - 1) / block;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(max_threads(), blocks));
  auto run = [&](std::size_t b) { fn(b * block, std::min(count, (b + 1) * block)); };
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) run(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) {
        try {
          run(b);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace utd
