#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace affdepth {

// Pairwise (tree) summation with a fixed split order, so the result depends
// only on the input sequence.
double pairwise_sum(std::span<const double> values) noexcept;

// Worker count: DDP_THREADS when set to a positive integer, else the
// hardware concurrency (at least 1).
unsigned worker_count();

// Calls fn(i) for i in [0, n), statically partitioned across workers. fn must
// only write to per-index state; results are then independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace affdepth
