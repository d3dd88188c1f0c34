#pragma once

#include <cstddef>
#include <functional>

namespace diffeolab {

/// Worker count used by the node loops; 1 runs everything inline.
void set_thread_count(int n);
int thread_count();

/// Splits [0, n) into contiguous chunks, one per worker. Each chunk writes to
/// its own slots, so results do not depend on the worker count. The first
/// exception thrown by any chunk is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace diffeolab
