#pragma once

#include <cstddef>
#include <functional>

namespace klsurv {

// Worker count from KLSURV_THREADS, else hardware concurrency (at least 1).
int default_thread_count();

// Runs job(i) for i in [0, n) on up to `threads` workers. Jobs must write
// only to their own output slot. If any job throws, the exception from the
// lowest index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job,
                  int threads);

}  // namespace klsurv
