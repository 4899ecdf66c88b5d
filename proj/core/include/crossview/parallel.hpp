#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace crossview {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Blocks until
/// all iterations complete. fn must be safe to call concurrently for
/// distinct i; results should be written to pre-sized slots indexed by i so
/// output order stays deterministic.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned workers = 0) {
  if (count == 0) return;
  unsigned n = workers ? workers : std::thread::hardware_concurrency();
  if (n <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  n = static_cast<unsigned>(std::min<std::size_t>(n, count));
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += n) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace crossview
