#pragma once

#include <cstddef>
#include <functional>

namespace nmde {

/// Worker count: NMDE_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
int default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must not
/// share mutable state. The first exception thrown by any item is rethrown on
/// the calling thread after all workers have stopped.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace nmde
