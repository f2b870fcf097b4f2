#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace abd {

/// Thread cap from ABDISTILL_THREADS (default: hardware concurrency).
std::size_t max_threads();

/// Runs fn(begin, end) over disjoint chunks of [0, n). Each index is handled
/// by exactly one call, so callers that write disjoint outputs stay
/// deterministic regardless of the thread count.
void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace abd
