// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace spx {

// Worker count used by the parallel loops. Defaults to $SPX_THREADS, else 1.
int num_threads();
void set_num_threads(int n);

// Calls fn(begin, end) on contiguous chunks of [0, n). Chunks are statically
// assigned so the split is fixed for a given thread count; callers write
// results per index and reduce afterwards in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace spx
