#include "hpnet/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace hpnet {

std::size_t worker_count() {
  static const std::size_t count = [] {
    if (const char* env = std::getenv("HPNET_THREADS")) {
      try {
        return static_cast<std::size_t>(std::stoul(env));
      } catch (...) {
        return std::size_t{0};
      }
    }
    return static_cast<std::size_t>(std::max(1u, std::thread::hardware_concurrency()));
  }();
  return count;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t units = (n + grain - 1) / grain;
  const std::size_t workers = std::min(worker_count(), units);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t per = (units + workers - 1) / workers;
  std::vector<std::jthread> threads;
  threads.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = std::min(n, w * per * grain);
    const std::size_t e = std::min(n, (w + 1) * per * grain);
    if (b < e) threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(0, std::min(n, per * grain));
}

}  // namespace hpnet
