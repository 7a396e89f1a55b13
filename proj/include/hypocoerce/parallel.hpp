// Deterministic path-parallel scheduling: work is split into fixed-size
// chunks whose boundaries depend only on the item count, workers pull chunks
// from an atomic queue, and every chunk writes into its own result slot.
// Reductions then run sequentially over chunk index, so results are
// bit-identical for any worker count.  HYPOCOERCE_WORKERS caps the pool.
#pragma once

#include <cstddef>
#include <functional>

namespace hypo {

int worker_count();

// fn(chunk_index, begin, end) over [0, n) in chunks of chunk_size.
void parallel_chunks(size_t n, size_t chunk_size,
                     const std::function<void(size_t, size_t, size_t)>& fn);

} // namespace hypo
