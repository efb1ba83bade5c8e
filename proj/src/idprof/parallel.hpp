#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace idprof {

inline unsigned resolve_threads(unsigned requested) noexcept {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(worker, worker_count) on `workers` threads and rethrows the first
// exception. Work partitioning is the caller's job so that results never
// depend on scheduling.
template <class Fn>
void run_workers(unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1) {
    fn(0u, 1u);
    return;
  }
  std::exception_ptr first_error;
  std::mutex mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        fn(w, workers);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// fn(i) for i in [0, count), statically interleaved across workers.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1)));
  run_workers(workers, [&](unsigned w, unsigned total) {
    for (std::size_t i = w; i < count; i += total) fn(i);
  });
}

}  // namespace idprof
