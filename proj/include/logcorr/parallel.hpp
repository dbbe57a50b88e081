#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace logcorr {

// Thread count from LOGCORR_THREADS, else the hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("LOGCORR_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) on `threads` workers.  Each index must write only to its own
// output slot; with that discipline results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  if (n == 0) return;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  const std::size_t chunk = std::max<std::size_t>(1, n / (static_cast<std::size_t>(threads) * 16));
  auto worker = [&] {
    for (;;) {
      const std::size_t start = next.fetch_add(chunk);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + chunk);
      try {
        for (std::size_t i = start; i < stop; ++i) body(i);
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace logcorr
