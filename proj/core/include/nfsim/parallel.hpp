#pragma once

#include <cstddef>
#include <functional>

namespace nfsim {

// Worker count used when parallel_for is called with threads <= 0.
void set_default_threads(int threads);
int default_threads();

// Runs body(i) for i in [0, n). Each index is handled by exactly one worker, so results
// written per index are independent of the worker count. Nested calls run serially.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, int threads = 0);

}  // namespace nfsim
