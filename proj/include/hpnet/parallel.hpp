#pragma once

#include <cstddef>
#include <functional>

namespace hpnet {

/// Worker cap from HPNET_THREADS (0 or 1 = run on the calling thread).
/// Unset means std::thread::hardware_concurrency().
std::size_t worker_count();

/// Splits [0, n) into contiguous chunks of whole `grain` units and runs
/// fn(begin, end) for each, possibly concurrently. Chunk boundaries never
/// change what any single index computes, only which thread computes it.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace hpnet
