#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mcdrop {

// Runs fn(chunk_index, begin, end) over contiguous chunks of [0, n).
// With n_threads <= 1 the single chunk executes inline, which keeps the
// sequential path free of thread machinery. Callers merge per-chunk
// results in chunk order.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t n_threads, Fn&& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  const std::size_t chunks = std::min(n_threads, n);
  const std::size_t base = n / chunks;
  const std::size_t rem = n % chunks;
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  std::size_t begin = 0;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = begin + base + (c < rem ? 1 : 0);
    workers.emplace_back([&fn, c, begin, end] { fn(c, begin, end); });
    begin = end;
  }
  for (std::thread& w : workers) w.join();
}

}  // namespace mcdrop
