#include "ddlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace ddlab {

namespace {
std::atomic<int> g_threads{1};
}

void set_worker_threads(int n) { g_threads = std::max(1, n); }
int worker_threads() { return g_threads; }

void parallel_subdomains(int count, const std::function<void(int)>& fn) {
  const int threads = std::min(g_threads.load(), count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace ddlab
