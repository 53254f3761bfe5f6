// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sepkit/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace sepkit {
namespace {

std::size_t env_threads() {
  static const std::size_t value = [] {
    std::size_t n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SEPKIT_THREADS")) {
      try {
        long v = std::stol(env);
        if (v >= 1) n = static_cast<std::size_t>(v);
      } catch (...) {
        // ignore malformed values
      }
    }
    return n;
  }();
  return value;
}

std::atomic<std::size_t> g_override{0};

}  // namespace

std::size_t max_threads() {
  std::size_t o = g_override.load();
  return o ? o : env_threads();
}

void set_max_threads(std::size_t n) { g_override.store(n); }

std::size_t chunk_count(std::size_t n) { return std::max<std::size_t>(1, std::min(n, max_threads())); }

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t chunks = chunk_count(n);
  if (chunks == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(chunks - 1);
  for (std::size_t c = 1; c < chunks; ++c) {
    workers.emplace_back([&, c] { fn(c, c * n / chunks, (c + 1) * n / chunks); });
  }
  fn(0, 0, n / chunks);
}

}  // namespace sepkit
