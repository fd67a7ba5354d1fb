#pragma once

#include <cstddef>
#include <functional>

namespace suplab {

// Worker count: hardware concurrency, capped by SUPLAB_THREADS when set.
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Each index must only write its own output
// slot, which keeps results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace suplab
