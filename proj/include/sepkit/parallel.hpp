// Copyright 2026 The sepkit Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <functional>

namespace sepkit {

/// Worker-thread budget. Reads SEPKIT_THREADS once; falls back to the
/// hardware concurrency. Always >= 1.
std::size_t max_threads();

/// Overrides the budget for the current process (tests use this to pin the
/// thread count). Passing 0 restores the environment-derived value.
void set_max_threads(std::size_t n);

/// Splits [0, n) into at most max_threads() contiguous chunks and runs
/// fn(chunk_index, begin, end) for each. Chunk boundaries depend only on n
/// and the thread budget, so per-chunk partial results reduced in chunk
/// order are reproducible for a fixed budget.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

/// Number of chunks parallel_chunks(n, ...) will produce.
std::size_t chunk_count(std::size_t n);

}  // namespace sepkit
