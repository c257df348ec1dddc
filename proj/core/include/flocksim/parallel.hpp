#pragma once

#include <cstddef>
#include <functional>

namespace flocksim {

// Worker cap: FLOCKSIM_THREADS when set (minimum 1), else the hardware
// concurrency.
int thread_budget();

// Runs fn(0..n-1) across up to thread_budget() workers. Each index owns its
// output slot, so results are identical for any worker count; only wall time
// changes.
void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace flocksim
