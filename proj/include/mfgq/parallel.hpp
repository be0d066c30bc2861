#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mfgq::detail {

inline unsigned worker_count(std::size_t items, unsigned requested = 0) {
  unsigned hw = requested ? requested : std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(items, 1)));
}

// Splits [0, count) into contiguous chunks, one per worker. Chunk boundaries
// depend only on (count, workers), so callers that merge per-worker results in
// worker order stay deterministic.
inline void parallel_chunks(
    std::size_t count,
    const std::function<void(std::size_t begin, std::size_t end, unsigned worker)>& body,
    unsigned requested_workers = 0) {
  if (count == 0) return;
  const unsigned workers = worker_count(count, requested_workers);
  if (workers == 1) {
    body(0, count, 0);
    return;
  }
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, static_cast<std::size_t>(w) * chunk);
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end, w] {
      try {
        body(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mfgq::detail
