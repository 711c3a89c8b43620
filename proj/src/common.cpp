#include "common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rmcl {

namespace {
std::atomic<int> g_threads{0};
}

void set_num_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int num_threads_setting() { return g_threads.load(); }

int num_threads() {
  int n = g_threads.load();
  if (n == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    n = hw == 0 ? 1 : static_cast<int>(hw);
  }
  return n;
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (end <= begin) return;
  const std::size_t span = end - begin;
  const int workers = std::min<std::size_t>(num_threads(), span);
  if (workers <= 1 || span < 2) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (span + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    std::size_t lo = begin + chunk * w;
    if (lo >= end) break;
    std::size_t hi = std::min(end, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
}

}  // namespace rmcl
