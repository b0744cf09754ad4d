#pragma once

#include <cstddef>
#include <functional>

namespace starpose {

// Worker count: STARPOSE_THREADS if set, else hardware concurrency, capped.
int worker_count();

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the worker
// count, so per-chunk results are reproducible on any machine; callers
// combine chunk outputs in chunk-index order to keep floating-point sums
// bit-stable.
void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace starpose
