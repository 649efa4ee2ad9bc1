#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiment.hpp"

using namespace gibbsflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "gibbsflow-unit" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string error_of(const std::string& text) {
  try {
    (void)parse_config(text, "cfg.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("experiment_cli") {
  TEST_CASE("config round trip: parse(serialize(c)) == c") {
    const ExperimentConfig defaults;
    CHECK(parse_config(serialize_config(defaults)) == defaults);
    for (const auto& entry : fs::directory_iterator(GIBBSFLOW_CONFIG_DIR)) {
      if (entry.path().extension() != ".ini") continue;
      CAPTURE(entry.path().string());
      const auto c = load_config(entry.path());
      const auto text = serialize_config(c);
      CHECK(parse_config(text) == c);
      CHECK(serialize_config(parse_config(text)) == text);
    }
  }

  TEST_CASE("non-default values survive the round trip") {
    ExperimentConfig c;
    c.model.dim = 2;
    c.model.box_lo = {-1, 0};
    c.model.box_hi = {1, 2};
    c.model.metric = Metric::Linf;
    c.model.coupling = 0.1 + 0.2;
    c.schedule.probes = {{1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 0, 0, 0, 0, 0, 0, 0, -1e-300}};
    c.a3.families = {{"long_memory_const", 0.3}};
    c.weights.zero_weights = true;
    c.run.seed = 18446744073709551615ull;
    CHECK(parse_config(serialize_config(c)) == c);
  }

  TEST_CASE("diagnostics carry file and line") {
    CHECK(error_of("[model]\ndim = 1\ncouplng = 2\n").find("cfg.ini:3") != std::string::npos);
    CHECK(error_of("[model]\ndim = 1\n\n[modle]\n").find("cfg.ini:4") != std::string::npos);
    CHECK(error_of("[schedule]\nt = 0.1, x\n").find("cfg.ini:2") != std::string::npos);
    CHECK(error_of("[schedule]\nt = 0.1\nt = 0.2\n").find("cfg.ini:3") != std::string::npos);
    CHECK(error_of("[schedule]\nsteps = 2.5\n").find("schedule.steps") != std::string::npos);
    CHECK(error_of("[model]\nbox = 0:-1\n").find("model.box") != std::string::npos);
    CHECK(error_of("[drift]\nfamily = markov_tanh\n[model]\ndim = 2\nbox = 0,0:1,1\n").find("drift.family") != std::string::npos);
    CHECK(error_of("[upsilon]\nvolumes = 3, 4\n").find("upsilon.volumes") != std::string::npos);
    CHECK(error_of("[schedule]\nprobes = 1, 2\n").find("schedule.probes") != std::string::npos);
    CHECK(error_of("[run]\nseed = 12\n").empty());
  }

  TEST_CASE("config error leaves no artifacts") {
    auto c = parse_config("[model]\nbox = 0:2\ninteraction = stock\ncoupling = 0.2\n");
    const fs::path out = scratch("config-error");
    CHECK_THROWS_AS(run_experiment("gibbs-sample", c, RunOverrides{std::nullopt, out.string(), 1}), ConfigError);
    CHECK_FALSE(fs::exists(out));
    CHECK_THROWS_AS(run_experiment("no-such-command", c, RunOverrides{std::nullopt, out.string(), 1}), ConfigError);
    CHECK_THROWS_AS(run_experiment("weights", c, RunOverrides{std::nullopt, out.string(), 0}), ConfigError);
    CHECK_FALSE(fs::exists(out));
  }

  TEST_CASE("numerical guard leaves no artifacts") {
    auto c = parse_config("[drift]\nfamily = constant\nstrength = 1e4\n[schedule]\nt = 1\nsteps = 4\npaths = 10\n");
    const fs::path out = scratch("guard");
    CHECK_THROWS_AS(run_experiment("series-vs-oracle", c, RunOverrides{std::nullopt, out.string(), 1}), NumericalGuardError);
    CHECK_FALSE(fs::exists(out));
  }

  TEST_CASE("zero model: series-vs-oracle passes the identity row and writes the artifact set") {
    auto c = parse_config("[model]\nbox = -1:1\n[schedule]\npaths = 500\nsteps = 8\n");
    const fs::path out = scratch("identity");
    const auto r = run_experiment("series-vs-oracle", c, RunOverrides{std::nullopt, out.string(), 1});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].criterion == "1");
    CHECK(r.rows[0].value == 0.0);
    CHECK(exit_code(r) == 0);
    for (const char* f : {"series_vs_oracle.csv", "series_terms.csv", "summary.tsv", "manifest.txt"})
      CHECK(fs::exists(out / f));
    const auto manifest = slurp(out / "manifest.txt");
    for (const char* key : {"config_hash_fnv1a64\t", "seed\t", "wall_seconds\t", "boost\t", "fmt\t"})
      CHECK(manifest.find(key) != std::string::npos);
  }

  TEST_CASE("kp-check with weights forced to zero passes") {
    auto c = parse_config(
        "[model]\nbox = -1:1\ninteraction = stock\ncoupling = 1\nsingle_site = 1\n"
        "[drift]\nfamily = markov_tanh\nstrength = 1\n"
        "[schedule]\nt = 0.05\nmax_polymers = 3\n[weights]\nzero_weights = true\n");
    const auto r = run_experiment("kp-check", c, RunOverrides{std::nullopt, scratch("kp-zero").string(), 1});
    CHECK(r.all_pass());
  }

  TEST_CASE("same config and seed: identical bytes except the manifest") {
    auto c = parse_config(
        "[model]\nbox = 0:1\ninteraction = stock\ncoupling = 0.3\nsingle_site = 0.3\n"
        "[drift]\nfamily = markov_tanh\nstrength = 0.3\n"
        "[schedule]\nt = 0.05, 0.02\nsteps = 8\npaths = 3000\nmax_polymers = 2\n");
    const fs::path a = scratch("repeat-a"), b = scratch("repeat-b"), d = scratch("repeat-seed");
    const auto ra = run_experiment("weights", c, RunOverrides{std::nullopt, a.string(), 1});
    const auto rb = run_experiment("weights", c, RunOverrides{std::nullopt, b.string(), 3});
    run_experiment("weights", c, RunOverrides{99, d.string(), 1});
    REQUIRE(ra.tables == rb.tables);
    for (const auto& t : ra.tables) CHECK(slurp(a / t) == slurp(b / t));
    CHECK(slurp(a / "summary.tsv") == slurp(b / "summary.tsv"));
    CHECK(slurp(a / "weights.csv") != slurp(d / "weights.csv"));
  }

  TEST_CASE("weight table columns") {
    auto c = parse_config("[model]\nbox = 0:2\ninteraction = stock\ncoupling = 0.3\n[schedule]\npaths = 100\nsteps = 4\n");
    const fs::path out = scratch("columns");
    run_experiment("weights", c, RunOverrides{std::nullopt, out.string(), 1});
    const auto text = slurp(out / "weights.csv");
    CHECK(text.substr(0, text.find('\n')) == "cluster,polymers,size,polymer_count,t,probe,estimate,std_error,n_paths");
  }

  TEST_CASE("probe patterns") {
    ScheduleConfig s;
    s.probe_values = {-2, 0, 2};
    const auto p = probe_configurations(s, Box::chain(0, 2));
    REQUIRE(p.size() == 5);
    auto values = [](const Configuration& x) { return std::vector<double>(x.values().begin(), x.values().end()); };
    CHECK(values(p[3]) == std::vector<double>{2, -2, 2});
    CHECK(values(p[4]) == std::vector<double>{-2, 2, -2});
    s.probe_mode = "grid";
    CHECK(probe_configurations(s, Box::chain(0, 2)).size() == 27);
  }

  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  }
}
