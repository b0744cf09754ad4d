#include "starpose/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace starpose {

int worker_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("STARPOSE_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    const int v = hw == 0 ? 1 : static_cast<int>(hw);
    return v > 16 ? 16 : v;
  }();
  return cached;
}

void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), num_chunks);

  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) {
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

}  // namespace starpose
