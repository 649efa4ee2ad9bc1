// Runs the stock configs and prints one PASS/FAIL line per acceptance criterion.
// usage: acceptance [out_dir] [config_dir]

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiment.hpp"

namespace gf = gibbsflow;
namespace fs = std::filesystem;

namespace {

struct Run {
  std::string command;
  std::string config;
};

struct Criterion {
  int id;
  std::string title;
  std::vector<Run> runs;
  double time_limit = 0.0;  // seconds over all runs, 0 = none
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Outcome {
  gf::RunResult result;
  std::string error;
};

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance");
  const fs::path configs = argc > 2 ? fs::path(argv[2]) : fs::path(GIBBSFLOW_CONFIG_DIR);

  const std::vector<Criterion> criteria{
      {1, "identity suite", {{"series-vs-oracle", "identity"}}, 60.0},
      {2, "single-site oracle vs convolution quadrature", {{"series-vs-oracle", "convolution"}}, 120.0},
      {3, "three-site series vs oracle", {{"series-vs-oracle", "cross_validation"}}, 900.0},
      {4, "reversal closed form", {{"appendix-checks", "appendix"}}},
      {5, "long-memory Fubini sum", {{"appendix-checks", "appendix"}}},
      {6, "drift moment decay", {{"a3-decay", "a3"}}},
      {7, "cluster weight decay fit", {{"weights", "weights"}}},
      {8, "Kotecky-Preiss t grid", {{"kp-check", "kp"}}},
      {9, "single-site kernel stabilization", {{"upsilon-stability", "upsilon"}}},
      {10, "sampler and mgf quadrature agreement", {{"gibbs-sample", "gibbs_sample"}}},
  };

  // Each distinct run once at one thread, then again at eight for the determinism check.
  std::map<std::string, Outcome> single, multi;
  auto key = [](const Run& r) { return r.command + ":" + r.config; };
  auto execute = [&](const Run& r, int threads, const fs::path& dir) {
    Outcome o;
    try {
      const auto config = gf::load_config(configs / (r.config + ".ini"));
      o.result = gf::run_experiment(r.command, config, gf::RunOverrides{std::nullopt, dir.string(), threads},
                                    (configs / (r.config + ".ini")).string());
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    return o;
  };
  for (const auto& c : criteria)
    for (const auto& r : c.runs) {
      const auto k = key(r);
      if (single.count(k)) continue;
      single[k] = execute(r, 1, out / "threads1" / r.config);
      multi[k] = execute(r, 8, out / "threads8" / r.config);
    }

  int failures = 0;
  auto report = [&](int id, const std::string& title, bool pass, const std::string& detail) {
    fmt::print("criterion {:>2} {}: {} ({})\n", id, pass ? "PASS" : "FAIL", title, detail);
    if (!pass) ++failures;
  };

  for (const auto& c : criteria) {
    bool pass = true;
    std::string detail;
    double seconds = 0.0;
    int checks = 0;
    for (const auto& r : c.runs) {
      const auto& o = single[key(r)];
      if (!o.error.empty()) {
        pass = false;
        detail += fmt::format("{} {}: {}; ", r.command, r.config, o.error);
        continue;
      }
      seconds += o.result.wall_seconds;
      for (const auto& row : o.result.rows) {
        if (row.criterion != std::to_string(c.id)) continue;
        ++checks;
        if (!row.pass) {
          pass = false;
          detail += fmt::format("failed: {} = {:.6g} {} {:.6g}; ", row.check, row.value, row.relation, row.threshold);
        }
      }
    }
    if (checks == 0 && detail.empty()) {
      pass = false;
      detail += "no checks reported; ";
    }
    if (c.time_limit > 0.0 && seconds >= c.time_limit) {
      pass = false;
      detail += fmt::format("runtime {:.1f} s over the {:.0f} s limit; ", seconds, c.time_limit);
    }
    if (pass) detail = fmt::format("{} checks, {:.1f} s", checks, seconds);
    report(c.id, c.title, pass, detail);
  }

  // Determinism: every table and summary byte-identical between 1 and 8 threads.
  {
    bool pass = true;
    std::size_t compared = 0;
    std::string detail;
    for (const auto& [k, o1] : single) {
      const auto& o8 = multi[k];
      if (!o1.error.empty() || !o8.error.empty()) {
        pass = false;
        detail += fmt::format("{} did not complete; ", k);
        continue;
      }
      auto files = o1.result.tables;
      files.push_back("summary.tsv");
      for (const auto& f : files) {
        ++compared;
        if (slurp(o1.result.out_dir / f) != slurp(o8.result.out_dir / f)) {
          pass = false;
          detail += fmt::format("{} {} differs; ", k, f);
        }
      }
    }
    if (pass) detail = fmt::format("{} files identical across --threads 1 and --threads 8", compared);
    report(11, "thread-count determinism", pass, detail);
  }
  return failures == 0 ? 0 : 1;
}
