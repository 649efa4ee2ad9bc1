#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiment.hpp"

namespace gf = gibbsflow;

int main(int argc, char** argv) {
  CLI::App app{"Cluster-expansion experiments for Gibbs measures under drifted diffusions"};
  app.set_version_flag("--version", gf::kVersion);
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  for (const auto& name : gf::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", seed, "root seed (overrides run.seed)");
    sub->add_option("--out", out, "output directory (overrides run.out)");
    sub->add_option("--threads", threads, "worker threads (overrides run.threads)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    const auto config = gf::load_config(config_path);
    const auto result = gf::run_experiment(command, config, gf::RunOverrides{seed, out, threads}, config_path);
    for (const auto& r : result.rows)
      fmt::print("{} [{}] {}: {:.6g} {} {:.6g}\n", r.pass ? "PASS" : "FAIL", r.criterion, r.check, r.value, r.relation,
                 r.threshold);
    fmt::print("wrote {} ({:.1f} s)\n", result.out_dir.string(), result.wall_seconds);
    return gf::exit_code(result);
  } catch (const gf::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const gf::NumericalGuardError& e) {
    fmt::print(stderr, "numerical guard: {}\n", e.what());
    return 3;
  } catch (const gf::DomainError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 4;
  }
}
