#pragma once

#include <cstddef>
#include <functional>

namespace rpd {

// Runs fn(0..n-1) on up to `jobs` threads. Callers write results into
// index-addressed slots, so the output never depends on the thread count.
// The first exception thrown by any task is rethrown on the caller.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace rpd
