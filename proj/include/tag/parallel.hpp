#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tag {

/// Fixed partition of [0, n) into chunks of `chunk` items. Boundaries depend
/// only on (n, chunk), so per-chunk partial results merged in chunk order are
/// identical for any worker count.
struct ChunkPlan {
  std::size_t n = 0;
  std::size_t chunk = 1;

  std::size_t count() const { return n == 0 ? 0 : (n + chunk - 1) / chunk; }
  std::size_t begin(std::size_t i) const { return i * chunk; }
  std::size_t end(std::size_t i) const { return std::min(n, (i + 1) * chunk); }
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(chunk_index, begin, end) once per chunk of `plan`, spread over up
/// to `workers` threads. The first exception thrown by any call is rethrown.
template <class Fn>
void parallel_chunks(const ChunkPlan& plan, unsigned workers, Fn&& fn) {
  const std::size_t chunks = plan.count();
  if (chunks == 0) return;
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), chunks));
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, plan.begin(c), plan.end(c));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        fn(c, plan.begin(c), plan.end(c));
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(body);
  body();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tag
