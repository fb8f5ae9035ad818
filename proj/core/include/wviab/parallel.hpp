#pragma once

#include <cstddef>
#include <functional>

namespace wviab {

/// Caps the number of worker threads used by parallel_for. n <= 0 restores
/// the hardware default.
void set_max_threads(int n);
int max_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Output is identical
/// for every thread count as long as fn writes only to per-index slots; there
/// are no reductions or shared accumulators in any caller inside the library.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace wviab
