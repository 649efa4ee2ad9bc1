#pragma once

// Drift families, discretized stochastic integrals, the Girsanov functional
// and its time reversal, closed-form reversal oracles, exponential moments.

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gibbsflow/lattice.hpp"
#include "gibbsflow/montecarlo.hpp"
#include "gibbsflow/path.hpp"

namespace gibbsflow {

enum class DriftFamily { Markovian, LongMemory, SpaceTimeKernel };

std::string to_string(DriftFamily family);

/// b_0(s, x_N): reads the current values of the neighborhood (in neighborhood order).
struct MarkovianDrift {
  std::function<double(double time, std::span<const double> nbhd)> b0;
  /// d b_0 / d x_0, the derivative in the origin coordinate.
  std::function<double(double time, std::span<const double> nbhd)> b0_prime;
  double bound = 0.0;        ///< sup |b_0|; evaluations are clipped to [-bound, bound]
  double prime_bound = 0.0;  ///< sup |b_0'|
  double lipschitz = 0.0;    ///< in sup-norm over the neighborhood
};

/// b_0(t) = int_0^t eps(s) (X_0(s) - X_0(0)) ds.
struct LongMemoryDrift {
  std::function<double(double)> memory;
  /// int_0^t |eps|, used for the Lipschitz constant.
  std::function<double(double)> memory_primitive;
};

/// Deterministic bounded-variation integrator.
struct Integrator {
  std::string name;
  std::function<double(double)> value;      ///< V(s), right-continuous, V(0) = 0
  std::function<double(double)> variation;  ///< total variation on [0, s]
};

/// b_0(t) = int_0^t alpha_0(t - s, X_N(s) - X_N(0)) dV_s.
struct SpaceTimeKernelDrift {
  std::function<double(double lag, std::span<const double> increments)> alpha0;
  double alpha_lipschitz = 0.0;  ///< in sup-norm over the increments
  Integrator integrator;
};

struct DriftSpec {
  std::string name;
  DriftFamily family = DriftFamily::Markovian;
  /// Offsets N, sorted, containing the origin.
  std::vector<Site> neighborhood;
  std::variant<MarkovianDrift, LongMemoryDrift, SpaceTimeKernelDrift> params;
  bool zero = false;

  bool is_zero() const noexcept { return zero; }
  int dim() const { return neighborhood.front().dim(); }
  std::size_t origin_index() const;
  /// N + i.
  SiteSet block(const Site& i) const;
  /// Lipschitz constant of b_0(t, .) on paths up to time t, sup-norm over space and time.
  double lipschitz(double t) const;
};

DriftSpec zero_drift(int dim = 1);
/// b_0 = c.
DriftSpec constant_drift(double c, int dim = 1);
/// b_0 = beta tanh(x_{-1} + x_1 - 2 x_0) on a chain neighborhood {-1, 0, 1}.
DriftSpec markov_tanh_drift(double beta);
/// b_0 = clip(slope * x_0, -bound, bound) on N = {0}. Test family with a kink at the clip.
DriftSpec linear_clipped_drift(double slope, double bound);
/// eps(s) = eps0 * s^{-1/4}.
DriftSpec long_memory_drift(double eps0);
/// eps(s) = eps0.
DriftSpec long_memory_const_drift(double eps0);
/// alpha_0(u, a) = kappa e^{-u} tanh(a_{-1} + a_1 - 2 a_0) on N = {-1, 0, 1}.
DriftSpec spacetime_kernel_drift(double kappa, Integrator integrator);

Integrator lebesgue_integrator();
/// V = h1 1[s >= u1] + h2 1[s >= u2].
Integrator two_jump_integrator(double u1, double h1, double u2, double h2);

/// Columns of N + i inside a path, resolved once.
struct DriftBinding {
  const DriftSpec* spec = nullptr;
  Site site;
  std::vector<std::size_t> columns;  ///< in neighborhood order
  std::size_t origin_column = 0;
};

/// Throws MissingSiteError when N + i is not on the path.
DriftBinding bind_drift(const DriftSpec& spec, const Site& i, const GridPath& path);

/// b_i(s_j, X_{[0, s_j]}); reads only path rows 0..j and columns N + i.
double eval_drift(const DriftBinding& binding, int j, const PathView& path);
double eval_drift(const DriftSpec& spec, const Site& i, int j, const GridPath& path);

/// b_i(s_j) for j = 0..M-1 in one pass (same values as eval_drift, computed incrementally).
void drift_sequence(const DriftBinding& binding, const PathView& path, std::span<double> out);

/// Left-point sum over j of b(s_{j-1}) (X_i(s_j) - X_i(s_{j-1})).
double ito_integral(const DriftBinding& binding, const PathView& path);
double ito_integral(const DriftSpec& spec, const Site& i, const GridPath& path);

struct GirsanovValue {
  double ito = 0.0;
  double quad = 0.0;  ///< sum of b(s_{j-1})^2 dt
  double value = 0.0; ///< ito - quad / 2
  Site site;
};

GirsanovValue girsanov_F(const DriftBinding& binding, const PathView& path);
GirsanovValue girsanov_F(const DriftSpec& spec, const Site& i, const GridPath& path);

/// girsanov_F on the reversed path.
double reversed_F(const DriftBinding& binding, const GridPath& path);
double reversed_F(const DriftSpec& spec, const Site& i, const GridPath& path);

/// Left-point discretization on the forward path of
///   -int b0(t-s, X(s)) dX_0(s) - int (b0'(t-s, X(s)) + b0(t-s, X(s))^2 / 2) ds.
double markov_reversed_closed_form(const DriftSpec& spec, const Site& i, const GridPath& path);

/// Three discretizations of int b0(t-s, X(s)) dX_0(s) on the forward path.
struct ReversalParts {
  double backward = 0.0;      ///< sum b(s_{j+1}) dX_j
  double ito = 0.0;           ///< sum b(s_j) dX_j
  double stratonovich = 0.0;  ///< sum (b(s_j) + b(s_{j+1}))/2 dX_j
};
ReversalParts markov_reversal_parts(const DriftSpec& spec, const Site& i, const GridPath& path);

/// Single sum sum_k eps(s_k) dt (X_i(t) - X_i(s_{k+1})) (X_i(s_k) - X_i(0)); equals the
/// double-sum Ito discretization of the long-memory drift exactly up to rounding.
double longmem_J_fubini(const DriftSpec& spec, const Site& i, const GridPath& path);

/// E exp(a |Z|) = 2 exp(a^2/2) Phi(a).
double gaussian_abs_mgf(double a);

/// Monte Carlo E_{P^x}[(exp|F_0 o theta_t| - 1)^{2p}] over Brownian paths from x.
/// `x` must cover N; samples with |F| > 700 raise NumericalGuardError.
MeanEstimate a3_moment_estimate(const DriftSpec& spec, const Configuration& x, double t, int steps,
                                std::size_t n_paths, int p_exponent, std::uint64_t root_seed,
                                std::uint64_t stream_tag, Execution execution = Execution::Parallel);

}  // namespace gibbsflow
