#pragma once

#include <cstddef>
#include <functional>

namespace tws {

/// Worker count used by every parallel section of the library. Defaults to
/// std::thread::hardware_concurrency(). Results never depend on this value.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) for every i in [0, n), statically partitioned into
/// contiguous blocks over the configured workers. The first exception thrown
/// by any worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace tws
