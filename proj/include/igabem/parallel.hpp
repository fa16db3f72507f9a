#ifndef IGABEM_PARALLEL_HPP
#define IGABEM_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace igabem {

/// Number of worker threads: IGABEM_THREADS env override, else hardware.
int worker_threads();

/// Runs fn(i) for i in [0, n) on the worker pool; writes must be disjoint per
/// index so the result is identical for any thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

}  // namespace igabem

#endif
