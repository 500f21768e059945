#pragma once

#include <cstddef>
#include <functional>

namespace mgt {

/// Worker count: MGTLAB_THREADS when set to a positive integer, else the hardware count.
int thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() workers. Each index is
/// handled exactly once; the first exception by index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace mgt
