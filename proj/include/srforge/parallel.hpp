#pragma once

#include <cstddef>
#include <functional>

namespace srforge {

/// Worker cap for data-parallel loops. Results never depend on this value:
/// every parallel loop writes disjoint outputs and reductions happen in index
/// order afterwards.
void set_num_threads(int n);
int num_threads();

/// Reads SRFORGE_THREADS, falling back to 1.
int threads_from_env();

/// Runs body(i) for i in [0, count). Blocks until all iterations finish and
/// rethrows the first exception raised by any iteration. Calls made from
/// inside a running loop execute serially on the calling worker.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace srforge
