#pragma once

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace roadtex {

/// Number of worker threads used by data-parallel loops. Results never
/// depend on this value: parallel loops only write disjoint outputs and
/// reductions are combined in a fixed order.
inline void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

inline int threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Calls fn(i) for i in [begin, end). Iterations must be independent.
template <class Fn>
void parallel_for(int begin, int end, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (int i = begin; i < end; ++i) fn(i);
#else
  for (int i = begin; i < end; ++i) fn(i);
#endif
}

}  // namespace roadtex
