#include "parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ctrl::parallel {

namespace {
std::atomic<int32_t> g_workers{0};
}

void set_workers(int32_t n) { g_workers.store(n < 0 ? 0 : n); }

int32_t workers() {
  int32_t n = g_workers.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int32_t>(hw);
}

void parallel_for(int64_t count, const std::function<void(int64_t)>& body) {
  if (count <= 0) return;
  int64_t n_threads = std::min<int64_t>(workers(), count);
  if (n_threads <= 1) {
    for (int64_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::atomic<int64_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  int64_t first_error_index = count;

  auto run = [&]() {
    for (;;) {
      int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n_threads - 1));
  for (int64_t t = 1; t < n_threads; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ctrl::parallel
