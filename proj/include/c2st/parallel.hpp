#pragma once

#include <cstddef>
#include <functional>

namespace c2st {

// Worker count: C2ST_WORKERS if set, else the hardware concurrency.
std::size_t worker_count();
// Runs fn(i) for i in [0, n) on a pool; results are indexed, so order is irrelevant.
// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace c2st
