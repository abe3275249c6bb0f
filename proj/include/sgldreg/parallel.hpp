#pragma once

#include <cstddef>
#include <functional>

namespace sgldreg {

// Worker count: SGLDREG_THREADS if set and positive, else hardware concurrency.
std::size_t thread_count();
void set_thread_count(std::size_t n);  // 0 restores the environment default

// Calls body(begin, end) over contiguous chunks of [0, count). Chunks write
// disjoint outputs, so results do not depend on the worker count. Calls made
// from inside a worker run serially.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace sgldreg
