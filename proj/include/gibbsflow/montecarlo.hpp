#pragma once

// Monte Carlo mean estimation over independent samples.
//
// Two implementations share one contract:
//   - estimate_means_serial: a single running accumulator over samples 0..n-1.
//     Kept as the reference for testing and benchmarking.
//   - estimate_means: fixed-size sample blocks reduced with OpenMP, merged in
//     block order. Results are bitwise identical for any thread count.
//
// A worker is created once per thread by `make_worker()` and called as
// `worker(sample_index, out)` where `out` has one slot per output quantity.
// Sample randomness must be derived from the sample index alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

namespace gibbsflow {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

enum class Execution { Serial, Parallel };

/// Welford accumulator with Chan's pairwise merge.
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const RunningMoments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double n_a = static_cast<double>(count);
    const double n_b = static_cast<double>(other.count);
    const double n = n_a + n_b;
    const double delta = other.mean - mean;
    mean += delta * (n_b / n);
    m2 += other.m2 + delta * delta * (n_a * n_b / n);
    count += other.count;
  }

  MeanEstimate estimate() const {
    MeanEstimate e;
    e.mean = mean;
    e.count = count;
    e.std_error = count > 1 ? std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count)) : 0.0;
    return e;
  }
};

/// Number of OpenMP workers used by estimate_means (default: OpenMP's choice).
void set_worker_threads(int threads);
int worker_threads();

inline constexpr std::size_t kSampleBlock = 2048;

/// Single-threaded reference. Same block partition and merge order as the OpenMP path, so the
/// two agree bit for bit.
template <class MakeWorker>
std::vector<MeanEstimate> estimate_means_serial(std::size_t n_samples, std::size_t n_outputs,
                                                MakeWorker&& make_worker) {
  std::vector<RunningMoments> total(n_outputs), block(n_outputs);
  std::vector<double> out(n_outputs);
  auto worker = make_worker();
  for (std::size_t begin = 0; begin < n_samples; begin += kSampleBlock) {
    std::fill(block.begin(), block.end(), RunningMoments{});
    const std::size_t end = std::min(n_samples, begin + kSampleBlock);
    for (std::size_t s = begin; s < end; ++s) {
      worker(s, std::span<double>(out));
      for (std::size_t q = 0; q < n_outputs; ++q) block[q].add(out[q]);
    }
    for (std::size_t q = 0; q < n_outputs; ++q) total[q].merge(block[q]);
  }
  std::vector<MeanEstimate> result;
  result.reserve(n_outputs);
  for (const auto& a : total) result.push_back(a.estimate());
  return result;
}

template <class MakeWorker>
std::vector<MeanEstimate> estimate_means_blocked(std::size_t n_samples, std::size_t n_outputs,
                                                 MakeWorker&& make_worker) {
  const std::size_t n_blocks = (n_samples + kSampleBlock - 1) / kSampleBlock;
  std::vector<RunningMoments> partial(n_blocks * n_outputs);
  std::vector<std::exception_ptr> failure(n_blocks);
  const auto n_blocks_signed = static_cast<long long>(n_blocks);

#pragma omp parallel num_threads(worker_threads())
  {
    std::vector<double> out(n_outputs);
    auto worker = make_worker();
#pragma omp for schedule(dynamic, 1)
    for (long long b = 0; b < n_blocks_signed; ++b) {
      const auto block = static_cast<std::size_t>(b);
      try {
        const std::size_t begin = block * kSampleBlock;
        const std::size_t end = std::min(n_samples, begin + kSampleBlock);
        RunningMoments* acc = &partial[block * n_outputs];
        for (std::size_t s = begin; s < end; ++s) {
          worker(s, std::span<double>(out));
          for (std::size_t q = 0; q < n_outputs; ++q) acc[q].add(out[q]);
        }
      } catch (...) {
        failure[block] = std::current_exception();
      }
    }
  }

  for (const auto& f : failure)
    if (f) std::rethrow_exception(f);

  std::vector<MeanEstimate> result;
  result.reserve(n_outputs);
  for (std::size_t q = 0; q < n_outputs; ++q) {
    RunningMoments total;
    for (std::size_t b = 0; b < n_blocks; ++b) total.merge(partial[b * n_outputs + q]);
    result.push_back(total.estimate());
  }
  return result;
}

template <class MakeWorker>
std::vector<MeanEstimate> estimate_means(std::size_t n_samples, std::size_t n_outputs, MakeWorker&& make_worker,
                                         Execution execution = Execution::Parallel) {
  if (execution == Execution::Serial)
    return estimate_means_serial(n_samples, n_outputs, std::forward<MakeWorker>(make_worker));
  return estimate_means_blocked(n_samples, n_outputs, std::forward<MakeWorker>(make_worker));
}

/// Fills `out[s]` for every sample with a per-thread worker; order of evaluation is unspecified.
template <class MakeWorker>
void parallel_fill(std::size_t n_samples, MakeWorker&& make_worker, Execution execution = Execution::Parallel) {
  if (execution == Execution::Serial) {
    auto worker = make_worker();
    for (std::size_t s = 0; s < n_samples; ++s) worker(s);
    return;
  }
  const auto n = static_cast<long long>(n_samples);
  std::exception_ptr failure;
#pragma omp parallel num_threads(worker_threads())
  {
    auto worker = make_worker();
#pragma omp for schedule(dynamic, 256)
    for (long long s = 0; s < n; ++s) {
      try {
        worker(static_cast<std::size_t>(s));
      } catch (...) {
#pragma omp critical(gibbsflow_fill_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace gibbsflow
