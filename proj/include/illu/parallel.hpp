#pragma once

#include <cstddef>
#include <functional>

namespace illu {

// Worker cap: ILLU_THREADS if set (>= 1), otherwise hardware concurrency.
int thread_cap();

// Runs fn(i) for all i in [0, n). Work items must write to disjoint slots so
// the schedule cannot change results; with a cap of 1 this is a plain loop.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace illu
