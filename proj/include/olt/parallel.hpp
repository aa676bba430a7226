#ifndef OLT_PARALLEL_HPP
#define OLT_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>

namespace olt {

/// Process-wide worker count for parallel_for (default: hardware threads).
void set_worker_threads(int n);
int worker_threads();

/// Runs fn(i) for i in [0, n) on a bounded pool. Results must be written to
/// index-addressed slots by the caller so output ordering is deterministic.
/// The first exception thrown by any job is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int threads = 0);

} // namespace olt

#endif // OLT_PARALLEL_HPP
