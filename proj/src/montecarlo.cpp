#include "gibbsflow/montecarlo.hpp"

#include <atomic>

namespace gibbsflow {

namespace {
std::atomic<int> g_worker_threads{0};
}

void set_worker_threads(int threads) { g_worker_threads.store(threads > 0 ? threads : 0); }

int worker_threads() {
  const int n = g_worker_threads.load();
  return n > 0 ? n : omp_get_max_threads();
}

}  // namespace gibbsflow
