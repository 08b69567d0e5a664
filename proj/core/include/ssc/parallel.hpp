#pragma once

#include <cstdint>
#include <functional>

namespace ssc {

// Number of worker threads used by parallel_for. Defaults to the hardware
// count, overridable via the SSC_THREADS environment variable or set_threads.
int num_threads();
void set_threads(int n);

// Runs fn(begin, end) over a static partition of [0, n). Each element is
// owned by exactly one chunk, so results are independent of the thread
// count as long as every output element is written by a single iteration.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace ssc
