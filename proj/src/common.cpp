// Copyright 2026 the splatjoint authors. Apache-2.0 license.

#include "splatjoint/common.hpp"

#include <algorithm>
#include <atomic>

namespace splatjoint {

namespace {
std::atomic<int> g_worker_threads{0};
}

void set_worker_threads(int n) { g_worker_threads.store(n < 0 ? 0 : n); }

int worker_threads() {
  int n = g_worker_threads.load();
  if (n == 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int threads = std::min<std::size_t>(worker_threads(), n);
  if (threads <= 1 || n < 256) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  const std::size_t chunk = std::max<std::size_t>(std::size_t{64}, n / (4 * threads));
  auto work = [&]() {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      const std::size_t end = std::min(begin + chunk, n);
      for (std::size_t i = begin; i < end; ++i) fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
}

}  // namespace splatjoint
