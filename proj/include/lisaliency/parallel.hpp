#pragma once

#include <cstddef>
#include <functional>

namespace lisaliency {

// Worker count from LISALIENCY_THREADS; 0 or unset means one per hardware
// thread.
std::size_t worker_count();

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = worker_count());

}  // namespace lisaliency
