#include "lesioncascade/parallel.hpp"

#include <algorithm>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lc {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) {
  g_max_threads = std::max(0, n);
#ifdef _OPENMP
  if (g_max_threads > 0) omp_set_num_threads(g_max_threads);
#endif
}

int max_threads() {
  if (g_max_threads > 0) return g_max_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {
bool parallel_enabled() {
#ifdef _OPENMP
  return max_threads() > 1;
#else
  return false;
#endif
}
}  // namespace detail

}  // namespace lc
