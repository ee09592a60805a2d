// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace lmot::io {

// Runs fn(0 .. count-1) on a pool of `jobs` worker threads (serially when
// jobs <= 1). fn writes its result into caller-owned slot i, so completion
// order never affects output order. The first exception is rethrown on the
// calling thread after the pool drains.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace lmot::io
