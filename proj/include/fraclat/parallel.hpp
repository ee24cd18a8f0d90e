#pragma once

#include <cstddef>
#include <functional>

namespace fraclat {

/// Number of worker threads used by parallel loops. Defaults to the value of
/// FRACLAT_THREADS, or 1 when unset.
int thread_count();
void set_thread_count(int n);

/// Runs body(b) for every block index b in [0, n_blocks). Blocks are handed out
/// dynamically, so callers must make each block's result depend only on b and
/// combine partial results in block order afterwards. Nested calls from inside
/// a worker run serially. The first exception thrown by any block is rethrown.
void parallel_for_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& body);

/// Fixed block length used for row-partitioned reductions. Results never depend
/// on the thread count because the partition is fixed.
inline constexpr std::size_t kReductionBlock = 64;

inline std::size_t block_count(std::size_t n, std::size_t block = kReductionBlock) {
  return (n + block - 1) / block;
}

}  // namespace fraclat
