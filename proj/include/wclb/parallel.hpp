#pragma once
// Deterministic thread pool helpers.
//
// All parallel loops in this project follow one discipline: every loop
// iteration writes only to its own slot of a pre-sized buffer, and any
// reduction over those slots happens sequentially afterwards.  Results are
// therefore bit-identical for any thread count, including 1.

#include <cstddef>
#include <functional>

namespace wclb {

// Global worker count.  Resolution order: explicit set_max_threads() call,
// WCLB_THREADS environment variable, hardware concurrency.
void set_max_threads(unsigned n);
unsigned max_threads();

// Runs fn(i) for i in [0, n), partitioned into contiguous blocks across
// workers.  fn must not touch shared mutable state except its own slot.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace wclb
