#pragma once

#include <cstddef>
#include <functional>

namespace ppcreg {

/// Process-wide cap on kernel parallelism. 0 means "hardware concurrency".
/// Initialized from the PPCREG_THREADS environment variable if set.
void set_max_threads(int n);
int max_threads();

/// Runs fn over [0, n) split into contiguous blocks, one per worker.
/// Workers write disjoint ranges, so results never depend on scheduling
/// or on the thread count. Exceptions from workers are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace ppcreg
