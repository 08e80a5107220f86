#pragma once

#include <cstddef>
#include <functional>

namespace cpath {

/// Number of threads used inside compute kernels. Results never depend on it:
/// work is split over independent output slices only.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n). Each index is handled by exactly one thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cpath
