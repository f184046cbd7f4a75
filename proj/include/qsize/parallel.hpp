#pragma once

#include <cstddef>
#include <functional>

namespace qsize {

/// Process-wide worker count used by the pure evaluation kernels.
/// Defaults to 1; the CLI sets it from --threads.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() workers.
/// Work is handed out dynamically; callers write results by index so the
/// outcome never depends on the schedule. The first exception thrown by any
/// body is rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qsize
