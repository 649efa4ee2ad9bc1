// Serial reference vs OpenMP kernels: wall time and bitwise agreement.
// usage: bench_kernels [threads] [paths]

#include <chrono>
#include <cstdlib>

#include <fmt/format.h>

#include "gibbsflow/oracle.hpp"
#include "gibbsflow/weights.hpp"

using namespace gibbsflow;

namespace {

template <class Fn>
double seconds(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 0;
  const std::size_t paths = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 200000;
  set_worker_threads(threads);

  const Box box = Box::chain(-2, 2);
  const auto spec = stock_interaction(0.2, 0.2);
  const auto drift = markov_tanh_drift(0.2);
  const auto apriori = AprioriMeasure::standard_gaussian();
  const Configuration x(box, std::vector<double>{1, -1, 1, -1, 1});
  PathSampling s;
  s.t = 0.05;
  s.steps = 32;
  s.n_paths = paths;
  s.root_seed = 1;

  fmt::print("threads {} paths {}\n", worker_threads(), paths);
  int mismatches = 0;
  {
    RatioEstimate a, b;
    s.execution = Execution::Serial;
    const double ts = seconds([&] { a = oracle_density_ratio(x, drift, spec, apriori, s); });
    s.execution = Execution::Parallel;
    const double tp = seconds([&] { b = oracle_density_ratio(x, drift, spec, apriori, s); });
    const bool same = a.ratio.mean == b.ratio.mean && a.ratio.std_error == b.ratio.std_error;
    mismatches += !same;
    fmt::print("oracle_density_ratio  serial {:8.3f} s  parallel {:8.3f} s  speedup {:5.2f}  identical {}\n", ts, tp,
               ts / tp, same);
  }
  {
    const auto vocab = build_polymer_vocabulary(box, drift, spec);
    const auto clusters = enumerate_clusters(vocab, std::nullopt, 3);
    std::vector<WeightEstimate> a, b;
    PathSampling w = s;
    w.n_paths = paths / 10;
    w.execution = Execution::Serial;
    const double ts = seconds([&] { a = estimate_weights(vocab, clusters, drift, spec, x, w); });
    w.execution = Execution::Parallel;
    const double tp = seconds([&] { b = estimate_weights(vocab, clusters, drift, spec, x, w); });
    bool same = a.size() == b.size();
    for (std::size_t k = 0; same && k < a.size(); ++k) same = a[k].value == b[k].value && a[k].std_error == b[k].std_error;
    mismatches += !same;
    fmt::print("estimate_weights ({} clusters, {} paths)  serial {:8.3f} s  parallel {:8.3f} s  speedup {:5.2f}  identical {}\n",
               clusters.size(), w.n_paths, ts, tp, ts / tp, same);
  }
  return mismatches == 0 ? 0 : 1;
}
