#pragma once

#include <cstddef>
#include <functional>

namespace projlab {

// Worker count: set_worker_count() if called, else PROJLAB_WORKERS, else hardware threads.
unsigned worker_count();
void set_worker_count(unsigned n);

// Runs body(i) for i in [0, n) on the worker pool. Callers write results into
// per-index slots and reduce them in index order, so output does not depend on
// the number of workers. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// Splits [0, n) into fixed blocks (independent of worker count) and returns the
// in-order sum of block(begin, end) over the blocks.
double blocked_sum(std::size_t n, std::size_t block,
                   const std::function<double(std::size_t, std::size_t)>& partial);

}  // namespace projlab
