#pragma once

#include <cstddef>
#include <functional>

namespace balgraph {

/// Worker count from BALGRAPH_THREADS (default 1, at least 1).
int worker_count();

/// Calls f(i) for i in [0, n) on up to worker_count() threads. Work is split
/// into contiguous static ranges, so results written by index do not depend
/// on scheduling. The first exception thrown is rethrown after all workers
/// finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace balgraph
