#pragma once

#include <cstddef>
#include <cstdlib>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tokrl {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace detail {
inline int& thread_override() {
  static int n = -1;  // -1: unset, 0: hardware, >=1: explicit
  return n;
}
}  // namespace detail

// 0 restores the hardware default, 1 forces the serial path.
inline void set_worker_threads(int n) { detail::thread_override() = n; }

inline int worker_threads() {
  int n = detail::thread_override();
  if (n < 0) {
    const char* env = std::getenv("TOKRL_THREADS");
    n = env ? std::atoi(env) : 0;
  }
  if (n <= 0) n = hardware_threads();
  return n < 1 ? 1 : n;
}

// Data-parallel loop over [0, n).  Items must be independent; any per-item
// randomness must come from seeds derived from the item index, so the serial
// path (threads == 1) and the OpenMP path produce identical results.
template <class F>
void parallel_for(std::size_t n, F&& f, int threads = -1) {
  if (threads < 0) threads = worker_threads();
#ifdef _OPENMP
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      f(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) f(i);
}

// Serial reference loop, kept distinct so tests and the benchmark can compare
// against the parallel path explicitly.
template <class F>
void serial_for(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

}  // namespace tokrl
