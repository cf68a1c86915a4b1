#pragma once

#include <cstdint>
#include <functional>

namespace punit::par {

// Global worker cap. 0 = use hardware_concurrency. Overridable via the
// --threads CLI flag or the PUNIT_THREADS environment variable.
int thread_cap();
void set_thread_cap(int n);

// Runs fn(begin, end, chunk_index) over [0, count) split into fixed-size
// chunks. The chunk grid depends only on `count` and `chunk_size`, never on
// the worker count, so writes into per-chunk slots (or disjoint index ranges)
// give results that are independent of the number of threads.
void parallel_chunks(std::int64_t count, std::int64_t chunk_size,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn);

// Number of chunks the above will use; handy for sizing per-chunk buffers.
inline int chunk_count(std::int64_t count, std::int64_t chunk_size) {
    if (count <= 0) return 0;
    return static_cast<int>((count + chunk_size - 1) / chunk_size);
}

} // namespace punit::par
