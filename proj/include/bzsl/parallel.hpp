#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace bzsl {

// Process-wide worker count used by parallel_for. 0 = hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n). Work is claimed through a shared atomic
// counter; every iteration writes only to its own output slot, so results
// are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace bzsl
