// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <cstddef>
#include <functional>

namespace neuralsurv {

// Process-wide worker cap. 0 or 1 means run inline.
void set_worker_count(std::size_t n);
std::size_t worker_count();

// Runs body(i) for i in [0, n) over static contiguous chunks. Each index is
// visited exactly once; callers write results into per-index slots and reduce
// afterwards in index order, so results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace neuralsurv
