#pragma once

#include <cstddef>
#include <functional>

namespace brim {

// Worker cap used by the per-pixel and pairwise kernels. 0 means hardware
// concurrency. Results never depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

// Calls fn(begin, end) over disjoint contiguous chunks of [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace brim
