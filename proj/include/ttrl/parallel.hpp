#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ttrl {

// Execution mode for the data-parallel kernels (per-question voting, batch
// rollouts, per-group gradients). Serial is the reference path; OpenMP must
// produce bit-identical results because every loop body owns its rng stream
// and writes only its own slot, and reductions run in fixed index order.
enum class ExecMode { kSerial, kParallel };

template <typename Fn>
void parallel_for(std::size_t n, ExecMode mode, Fn&& body) {
#ifdef _OPENMP
  if (mode == ExecMode::kParallel) {
    #pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace ttrl
