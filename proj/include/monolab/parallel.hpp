#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace monolab {

/// Runs body(i) for i in [0, count). Results must be written by index so the
/// outcome does not depend on scheduling.
using ParallelFor = std::function<void(std::size_t, const std::function<void(std::size_t)>&)>;

inline void serial_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  for (std::size_t i = 0; i < count; ++i) body(i);
}

/// Fixed-width fan-out over an index range with dynamic scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads) : threads_(std::max<std::size_t>(1, threads)) {}

  std::size_t threads() const { return threads_; }

  void run(std::size_t count, const std::function<void(std::size_t)>& body) const {
    const std::size_t width = std::min(threads_, count);
    if (width <= 1) {
      serial_for(count, body);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(width);
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ParallelFor as_parallel_for() const {
    return [this](std::size_t count, const std::function<void(std::size_t)>& body) { run(count, body); };
  }

 private:
  std::size_t threads_;
};

}  // namespace monolab
