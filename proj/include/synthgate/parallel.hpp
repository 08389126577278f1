#pragma once

#include <cstddef>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace synthgate {

inline int hardware_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Runs body(i) for i in [0, n). threads <= 1 takes the plain serial loop,
// which is the reference path for correctness tests; the OpenMP path must
// produce bitwise-identical results because each body(i) writes only to its
// own output slots and all reductions happen afterwards in index order.
template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace synthgate
