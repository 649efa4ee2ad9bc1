#pragma once

// Experiment configuration (INI), validation, and the subcommand runners that write
// CSV tables, manifest.txt and summary.tsv.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gibbsflow/drift.hpp"
#include "gibbsflow/gibbs.hpp"
#include "gibbsflow/lattice.hpp"

namespace gibbsflow {

inline constexpr const char* kVersion = "0.1.0";

struct ModelConfig {
  int dim = 1;
  std::vector<int> box_lo{0};
  std::vector<int> box_hi{0};
  std::string interaction = "zero";  ///< zero | stock | cos_pair | cos_single
  double coupling = 0.0;             ///< J
  double single_site = 0.0;          ///< lambda
  int range = 1;
  Metric metric = Metric::Linf;
  std::string apriori = "gaussian";  ///< gaussian | quartic
  double apriori_sigma = 1.0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DriftConfig {
  /// zero | constant | markov_tanh | linear_clipped | long_memory | long_memory_const | spacetime_kernel
  std::string family = "zero";
  double strength = 0.0;
  double bound = 1.0;                ///< linear_clipped only
  std::string integrator = "lebesgue";  ///< lebesgue | two_jump
  std::vector<double> jumps{0.05, 0.5, 0.1, -0.25};  ///< u1, h1, u2, h2 for two_jump

  friend bool operator==(const DriftConfig&, const DriftConfig&) = default;
};

struct ScheduleConfig {
  std::vector<double> t{0.05};
  int steps = 32;
  std::size_t paths = 100000;
  int max_polymers = 4;
  std::size_t count_limit = 1000000;
  std::vector<double> probe_values{-2.0, 0.0, 2.0};
  /// patterns: uniform and alternating configurations built from probe_values; grid: full product.
  std::string probe_mode = "patterns";
  /// Explicit probe configurations (lexicographic site order); override probe_values when set.
  std::vector<std::vector<double>> probes;

  friend bool operator==(const ScheduleConfig&, const ScheduleConfig&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string out = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct A3Config {
  int p = 3;
  /// name:strength entries.
  std::vector<std::pair<std::string, double>> families{{"markov_tanh", 1.0}, {"long_memory", 1.0}, {"spacetime_kernel", 1.0}};

  friend bool operator==(const A3Config&, const A3Config&) = default;
};

struct AppendixConfig {
  double constant = 0.7;
  double beta = 1.0;
  double t = 0.1;
  int fine_steps = 4096;
  int coarse_steps = 256;
  std::size_t paths = 100;
  double eps0 = 1.0;
  int fubini_steps = 64;
  std::size_t fubini_paths = 1000;

  friend bool operator==(const AppendixConfig&, const AppendixConfig&) = default;
};

struct UpsilonConfig {
  std::vector<int> volumes{3, 5, 7};
  double y_min = -2.0;
  double y_max = 2.0;
  int y_points = 21;
  int quadrature_order = 64;
  /// x_j = x[j mod size] on the largest chain.
  std::vector<double> x{0.5, -0.5};

  friend bool operator==(const UpsilonConfig&, const UpsilonConfig&) = default;
};

struct SamplerConfig {
  std::size_t samples = 100000;
  long burn_in = 10000;
  long thin = 10;
  std::vector<double> mgf_points{0.0, 0.5, 1.0, 2.0};

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct WeightsConfig {
  int decay_max_size = 4;
  /// kp-check only: skip sampling and use w = 0 (the t -> 0 limit).
  bool zero_weights = false;

  friend bool operator==(const WeightsConfig&, const WeightsConfig&) = default;
};

struct ExperimentConfig {
  ModelConfig model;
  DriftConfig drift;
  ScheduleConfig schedule;
  RunConfig run;
  A3Config a3;
  AppendixConfig appendix;
  UpsilonConfig upsilon;
  SamplerConfig sampler;
  WeightsConfig weights;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError with "file:line: section.key: reason" diagnostics. Unknown sections and
/// keys are errors; absent keys keep their defaults.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& file);
/// Canonical form: every key, fixed order, 17 significant digits.
std::string serialize_config(const ExperimentConfig& config);

Box model_box(const ModelConfig& model);
InteractionSpec model_interaction(const ModelConfig& model);
AprioriMeasure model_apriori(const ModelConfig& model);
DriftSpec make_drift(const std::string& family, double strength, const DriftConfig& extra, int dim);
DriftSpec model_drift(const ExperimentConfig& config);

/// Probe configurations on `box` from the schedule block.
std::vector<Configuration> probe_configurations(const ScheduleConfig& schedule, const Box& box);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

const std::vector<std::string>& subcommands();

struct CriterionRow {
  std::string criterion;
  std::string check;
  double value = 0.0;
  std::string relation;  ///< "<=", "<", ">=", ">", "==", "info"
  double threshold = 0.0;
  bool pass = false;
};

struct RunResult {
  std::vector<CriterionRow> rows;
  std::filesystem::path out_dir;
  std::vector<std::string> tables;  ///< CSV files written, in order
  double wall_seconds = 0.0;

  bool all_pass() const;
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

/// Validates the config for `command` (ConfigError before anything is written), runs it,
/// and writes the artifacts. NumericalGuardError propagates.
RunResult run_experiment(const std::string& command, ExperimentConfig config, const RunOverrides& overrides = {},
                         const std::string& config_label = "<memory>");

/// Exit status contract: 0 pass, 1 criterion failure, 2 configuration error, 3 numerical guard.
int exit_code(const RunResult& result);

}  // namespace gibbsflow
