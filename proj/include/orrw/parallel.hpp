#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace orrw {

/// Thread budget: `requested` if positive, else hardware concurrency; capped by ORRW_THREADS.
unsigned resolve_threads(unsigned requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers pulling indices from a shared
/// counter. Results are written by index, so the schedule never shows in the output.
template <typename T>
std::vector<T> run_replicas(std::uint64_t n, unsigned threads,
                            const std::function<T(std::uint64_t)>& body) {
  std::vector<T> out(n);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (true) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(std::max(threads, 1U), std::max<std::uint64_t>(n, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace orrw
