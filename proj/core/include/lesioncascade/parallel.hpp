#pragma once

namespace lc {

// Caps the number of threads used inside tensor operations. 0 means use the
// hardware concurrency. Parallel loops only ever split work so that each
// output element has a single writer and per-element summation order is
// unchanged, so results are bit-identical at any thread count.
void set_max_threads(int n);
int max_threads();

namespace detail {
// True when operations should spawn a parallel region at all.
bool parallel_enabled();
}  // namespace detail

}  // namespace lc
