#pragma once

#include <cstddef>
#include <functional>

namespace matforge {

/// Worker count used by parallel_for. Defaults to MATFORGE_THREADS when set,
/// otherwise the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs body(chunk) for chunk in [0, chunks). Chunk boundaries are chosen by
/// the caller, so results that are reduced per chunk in index order do not
/// depend on the number of workers. Exceptions from any chunk are rethrown.
void parallel_for(std::size_t chunks, const std::function<void(std::size_t)> &body);

/// Splits [0, n) into fixed-size ranges and runs body(begin, end, chunk_index).
void parallel_range(std::size_t n, std::size_t grain,
                    const std::function<void(std::size_t, std::size_t, std::size_t)> &body);

inline std::size_t chunk_count(std::size_t n, std::size_t grain) { return (n + grain - 1) / grain; }

}  // namespace matforge
