#include "gibbsflow/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <fmt/format.h>

#include "gibbsflow/cluster.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/oracle.hpp"
#include "gibbsflow/weights.hpp"

namespace gibbsflow {

namespace pt = boost::property_tree;

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Accepts "1e5" for integer fields as long as the value is integral.
template <class T>
T parse_integral(const std::string& s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  double d = 0.0;
  auto [p2, e2] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (e2 == std::errc() && p2 == s.data() + s.size() && std::isfinite(d) && d == std::floor(d) &&
      std::abs(d) < 9.0e15 && (std::is_signed_v<T> || d >= 0.0))
    return static_cast<T>(d);
  throw ConfigError(fmt::format("expected an integer, got '{}'", s));
}

double parse_real(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError(fmt::format("expected a finite number, got '{}'", s));
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(fmt::format("expected true or false, got '{}'", s));
}

std::vector<double> parse_reals(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(parse_real(item));
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(parse_integral<int>(item));
  return out;
}

class Reader {
 public:
  Reader(const std::string& text, std::string source) : source_(std::move(source)) {
    // Line numbers for diagnostics; property_tree keeps none.
    std::istringstream lines(text);
    std::string line, section;
    int number = 0;
    while (std::getline(lines, line)) {
      ++number;
      const std::string t = trim(line);
      if (t.empty() || t[0] == ';' || t[0] == '#') continue;
      if (t.front() == '[' && t.back() == ']') {
        section = trim(std::string_view(t).substr(1, t.size() - 2));
        section_lines_.emplace(section, number);
        continue;
      }
      const auto eq = t.find('=');
      if (eq != std::string::npos) key_lines_.emplace(section + "." + trim(std::string_view(t).substr(0, eq)), number);
    }
    std::istringstream in(text);
    try {
      pt::read_ini(in, tree_);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(fmt::format("{}:{}: {}", source_, e.line(), e.message()));
    }
  }

  template <class Fn>
  void field(const std::string& section, const std::string& key, Fn&& apply) {
    known_.insert(section + "." + key);
    const auto node = tree_.get_child_optional(pt::ptree::path_type(section + "." + key, '.'));
    if (!node) return;
    const std::string value = trim(node->get_value<std::string>());
    try {
      apply(value);
    } catch (const ConfigError& e) {
      fail(section, key, e.what());
    } catch (const Error& e) {
      fail(section, key, e.what());
    }
  }

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& why) const {
    const auto it = key_lines_.find(section + "." + key);
    const std::string where = it == key_lines_.end() ? source_ : fmt::format("{}:{}", source_, it->second);
    throw ConfigError(fmt::format("{}: {}.{}: {}", where, section, key, why));
  }

  void reject_unknown() const {
    // Empty sections never reach the tree; check the names seen by the pre-pass too.
    for (const auto& [name, line] : section_lines_) {
      const bool known = std::any_of(known_.begin(), known_.end(), [&](const std::string& k) { return k.rfind(name + ".", 0) == 0; });
      if (!known) throw ConfigError(fmt::format("{}:{}: unknown section [{}]", source_, line, name));
    }
    for (const auto& [name, sec] : tree_) {
      if (sec.empty() && !sec.data().empty()) {
        const auto it = key_lines_.find("." + name);
        throw ConfigError(fmt::format("{}:{}: key '{}' outside any section", source_,
                                      it == key_lines_.end() ? 0 : it->second, name));
      }
      bool section_known = false;
      for (const auto& k : known_)
        if (k.rfind(name + ".", 0) == 0) section_known = true;
      if (!section_known) {
        const auto it = section_lines_.find(name);
        throw ConfigError(fmt::format("{}:{}: unknown section [{}]", source_, it == section_lines_.end() ? 0 : it->second, name));
      }
      for (const auto& [key, unused] : sec) {
        (void)unused;
        if (!known_.count(name + "." + key)) fail(name, key, "unknown key");
      }
    }
  }

 private:
  std::string source_;
  pt::ptree tree_;
  std::multimap<std::string, int> section_lines_;
  std::map<std::string, int> key_lines_;
  std::set<std::string> known_;
};

const std::set<std::string>& interaction_names() {
  static const std::set<std::string> names{"zero", "stock", "cos_pair", "cos_single"};
  return names;
}

const std::set<std::string>& drift_names() {
  static const std::set<std::string> names{"zero",        "constant",          "markov_tanh",     "linear_clipped",
                                           "long_memory", "long_memory_const", "spacetime_kernel"};
  return names;
}

std::string join_reals(const std::vector<double>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += fmt::format("{}{:.17g}", k ? sep : "", v[k]);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += fmt::format("{}{}", k ? "," : "", v[k]);
  return out;
}

void validate(Reader& r, const ExperimentConfig& c) {
  const auto& m = c.model;
  if (m.dim < 1 || m.dim > kMaxDim) r.fail("model", "dim", fmt::format("must be in 1..{}", kMaxDim));
  if (static_cast<int>(m.box_lo.size()) != m.dim || static_cast<int>(m.box_hi.size()) != m.dim)
    r.fail("model", "box", "corner dimension does not match dim");
  for (int a = 0; a < m.dim; ++a)
    if (m.box_lo[static_cast<std::size_t>(a)] > m.box_hi[static_cast<std::size_t>(a)]) r.fail("model", "box", "lo > hi");
  if (!interaction_names().count(m.interaction)) r.fail("model", "interaction", fmt::format("unknown family '{}'", m.interaction));
  if (m.range < 0) r.fail("model", "range", "must be >= 0");
  if (m.apriori != "gaussian" && m.apriori != "quartic") r.fail("model", "apriori", "expected gaussian or quartic");
  if (!(m.apriori_sigma > 0.0)) r.fail("model", "apriori_sigma", "must be positive");
  const std::size_t volume = model_box(m).size();
  if (volume > 64) r.fail("model", "box", "at most 64 sites");

  const auto& d = c.drift;
  if (!drift_names().count(d.family)) r.fail("drift", "family", fmt::format("unknown family '{}'", d.family));
  if (d.family != "zero" && d.family != "constant" && m.dim != 1)
    r.fail("drift", "family", "only zero and constant drifts are defined for dim > 1");
  if (d.integrator != "lebesgue" && d.integrator != "two_jump") r.fail("drift", "integrator", "expected lebesgue or two_jump");
  if (d.jumps.size() != 4) r.fail("drift", "jumps", "expected u1,h1,u2,h2");
  if (d.jumps[0] < 0.0 || d.jumps[2] < 0.0) r.fail("drift", "jumps", "jump times must be >= 0");
  if (!(d.bound > 0.0)) r.fail("drift", "bound", "must be positive");

  const auto& s = c.schedule;
  if (s.t.empty()) r.fail("schedule", "t", "needs at least one time");
  for (double t : s.t)
    if (!(t > 0.0)) r.fail("schedule", "t", "times must be positive");
  if (s.steps < 1) r.fail("schedule", "steps", "must be >= 1");
  if (s.paths < 2) r.fail("schedule", "paths", "must be >= 2");
  if (s.max_polymers < 1) r.fail("schedule", "max_polymers", "must be >= 1");
  if (s.count_limit < 1) r.fail("schedule", "count_limit", "must be >= 1");
  if (s.probe_mode != "patterns" && s.probe_mode != "grid") r.fail("schedule", "probe_mode", "expected patterns or grid");
  if (s.probes.empty() && s.probe_values.empty()) r.fail("schedule", "probe_values", "needs at least one value");
  for (const auto& p : s.probes)
    if (p.size() != volume) r.fail("schedule", "probes", fmt::format("each probe needs {} values", volume));

  if (c.a3.p < 3 || c.a3.p % 2 == 0) r.fail("a3", "p", "must be odd and >= 3");
  for (const auto& [name, strength] : c.a3.families) {
    if (!drift_names().count(name) || name == "zero") r.fail("a3", "families", fmt::format("unknown drift family '{}'", name));
    (void)strength;
  }

  const auto& a = c.appendix;
  if (!(a.t > 0.0)) r.fail("appendix", "t", "must be positive");
  if (a.fine_steps < 2 || a.coarse_steps < 2 || a.fubini_steps < 2) r.fail("appendix", "fine_steps", "step counts must be >= 2");
  if (a.paths < 1 || a.fubini_paths < 1) r.fail("appendix", "paths", "must be >= 1");

  const auto& u = c.upsilon;
  if (u.volumes.empty()) r.fail("upsilon", "volumes", "needs at least one volume");
  for (int v : u.volumes)
    if (v < 1 || v % 2 == 0 || v > 63) r.fail("upsilon", "volumes", "volumes must be odd chain lengths in 1..63");
  if (!(u.y_max > u.y_min)) r.fail("upsilon", "y_max", "must exceed y_min");
  if (u.y_points < 2) r.fail("upsilon", "y_points", "must be >= 2");
  if (u.quadrature_order < 2) r.fail("upsilon", "quadrature_order", "must be >= 2");
  if (u.x.empty()) r.fail("upsilon", "x", "needs at least one value");

  if (c.sampler.samples < 1) r.fail("sampler", "samples", "must be >= 1");
  if (c.sampler.burn_in < 0) r.fail("sampler", "burn_in", "must be >= 0");
  if (c.sampler.thin < 1) r.fail("sampler", "thin", "must be >= 1");
  for (double v : c.sampler.mgf_points)
    if (std::abs(v) > 20.0) r.fail("sampler", "mgf_points", "|a| <= 20 expected");

  if (c.weights.decay_max_size < 2) r.fail("weights", "decay_max_size", "must be >= 2");
  if (c.run.threads < 0) r.fail("run", "threads", "must be >= 0");
  if (c.run.out.empty()) r.fail("run", "out", "must not be empty");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  Reader r(text, source);
  ExperimentConfig c;
  auto& m = c.model;
  r.field("model", "dim", [&](const std::string& v) { m.dim = parse_integral<int>(v); });
  r.field("model", "box", [&](const std::string& v) {
    const auto corners = split(v, ':');
    if (corners.size() != 2) throw ConfigError("expected lo:hi with comma-separated coordinates");
    m.box_lo = parse_ints(corners[0]);
    m.box_hi = parse_ints(corners[1]);
  });
  r.field("model", "interaction", [&](const std::string& v) { m.interaction = v; });
  r.field("model", "coupling", [&](const std::string& v) { m.coupling = parse_real(v); });
  r.field("model", "single_site", [&](const std::string& v) { m.single_site = parse_real(v); });
  r.field("model", "range", [&](const std::string& v) { m.range = parse_integral<int>(v); });
  r.field("model", "metric", [&](const std::string& v) {
    if (v == "l1") m.metric = Metric::L1;
    else if (v == "linf") m.metric = Metric::Linf;
    else throw ConfigError("expected l1 or linf");
  });
  r.field("model", "apriori", [&](const std::string& v) { m.apriori = v; });
  r.field("model", "apriori_sigma", [&](const std::string& v) { m.apriori_sigma = parse_real(v); });

  auto& d = c.drift;
  r.field("drift", "family", [&](const std::string& v) { d.family = v; });
  r.field("drift", "strength", [&](const std::string& v) { d.strength = parse_real(v); });
  r.field("drift", "bound", [&](const std::string& v) { d.bound = parse_real(v); });
  r.field("drift", "integrator", [&](const std::string& v) { d.integrator = v; });
  r.field("drift", "jumps", [&](const std::string& v) { d.jumps = parse_reals(v); });

  auto& s = c.schedule;
  r.field("schedule", "t", [&](const std::string& v) { s.t = parse_reals(v); });
  r.field("schedule", "steps", [&](const std::string& v) { s.steps = parse_integral<int>(v); });
  r.field("schedule", "paths", [&](const std::string& v) { s.paths = parse_integral<std::size_t>(v); });
  r.field("schedule", "max_polymers", [&](const std::string& v) { s.max_polymers = parse_integral<int>(v); });
  r.field("schedule", "count_limit", [&](const std::string& v) { s.count_limit = parse_integral<std::size_t>(v); });
  r.field("schedule", "probe_values", [&](const std::string& v) { s.probe_values = parse_reals(v); });
  r.field("schedule", "probe_mode", [&](const std::string& v) { s.probe_mode = v; });
  r.field("schedule", "probes", [&](const std::string& v) {
    s.probes.clear();
    if (v.empty()) return;
    for (const auto& p : split(v, ';')) s.probes.push_back(parse_reals(p));
  });

  r.field("run", "seed", [&](const std::string& v) { c.run.seed = parse_integral<std::uint64_t>(v); });
  r.field("run", "threads", [&](const std::string& v) { c.run.threads = parse_integral<int>(v); });
  r.field("run", "out", [&](const std::string& v) { c.run.out = v; });

  r.field("a3", "p", [&](const std::string& v) { c.a3.p = parse_integral<int>(v); });
  r.field("a3", "families", [&](const std::string& v) {
    c.a3.families.clear();
    for (const auto& item : split(v, ',')) {
      const auto parts = split(item, ':');
      if (parts.size() != 2) throw ConfigError("expected name:strength entries");
      c.a3.families.emplace_back(parts[0], parse_real(parts[1]));
    }
  });

  auto& a = c.appendix;
  r.field("appendix", "constant", [&](const std::string& v) { a.constant = parse_real(v); });
  r.field("appendix", "beta", [&](const std::string& v) { a.beta = parse_real(v); });
  r.field("appendix", "t", [&](const std::string& v) { a.t = parse_real(v); });
  r.field("appendix", "fine_steps", [&](const std::string& v) { a.fine_steps = parse_integral<int>(v); });
  r.field("appendix", "coarse_steps", [&](const std::string& v) { a.coarse_steps = parse_integral<int>(v); });
  r.field("appendix", "paths", [&](const std::string& v) { a.paths = parse_integral<std::size_t>(v); });
  r.field("appendix", "eps0", [&](const std::string& v) { a.eps0 = parse_real(v); });
  r.field("appendix", "fubini_steps", [&](const std::string& v) { a.fubini_steps = parse_integral<int>(v); });
  r.field("appendix", "fubini_paths", [&](const std::string& v) { a.fubini_paths = parse_integral<std::size_t>(v); });

  auto& u = c.upsilon;
  r.field("upsilon", "volumes", [&](const std::string& v) { u.volumes = parse_ints(v); });
  r.field("upsilon", "y_min", [&](const std::string& v) { u.y_min = parse_real(v); });
  r.field("upsilon", "y_max", [&](const std::string& v) { u.y_max = parse_real(v); });
  r.field("upsilon", "y_points", [&](const std::string& v) { u.y_points = parse_integral<int>(v); });
  r.field("upsilon", "quadrature_order", [&](const std::string& v) { u.quadrature_order = parse_integral<int>(v); });
  r.field("upsilon", "x", [&](const std::string& v) { u.x = parse_reals(v); });

  r.field("sampler", "samples", [&](const std::string& v) { c.sampler.samples = parse_integral<std::size_t>(v); });
  r.field("sampler", "burn_in", [&](const std::string& v) { c.sampler.burn_in = parse_integral<long>(v); });
  r.field("sampler", "thin", [&](const std::string& v) { c.sampler.thin = parse_integral<long>(v); });
  r.field("sampler", "mgf_points", [&](const std::string& v) { c.sampler.mgf_points = parse_reals(v); });

  r.field("weights", "decay_max_size", [&](const std::string& v) { c.weights.decay_max_size = parse_integral<int>(v); });
  r.field("weights", "zero_weights", [&](const std::string& v) { c.weights.zero_weights = parse_bool(v); });

  r.reject_unknown();
  validate(r, c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", file.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), file.string());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string o;
  auto line = [&](std::string_view key, const std::string& value) { o += fmt::format("{} = {}\n", key, value); };
  auto real = [](double v) { return fmt::format("{:.17g}", v); };
  o += "[model]\n";
  line("dim", std::to_string(c.model.dim));
  line("box", join_ints(c.model.box_lo) + ":" + join_ints(c.model.box_hi));
  line("interaction", c.model.interaction);
  line("coupling", real(c.model.coupling));
  line("single_site", real(c.model.single_site));
  line("range", std::to_string(c.model.range));
  line("metric", c.model.metric == Metric::L1 ? "l1" : "linf");
  line("apriori", c.model.apriori);
  line("apriori_sigma", real(c.model.apriori_sigma));
  o += "\n[drift]\n";
  line("family", c.drift.family);
  line("strength", real(c.drift.strength));
  line("bound", real(c.drift.bound));
  line("integrator", c.drift.integrator);
  line("jumps", join_reals(c.drift.jumps));
  o += "\n[schedule]\n";
  line("t", join_reals(c.schedule.t));
  line("steps", std::to_string(c.schedule.steps));
  line("paths", std::to_string(c.schedule.paths));
  line("max_polymers", std::to_string(c.schedule.max_polymers));
  line("count_limit", std::to_string(c.schedule.count_limit));
  line("probe_values", join_reals(c.schedule.probe_values));
  line("probe_mode", c.schedule.probe_mode);
  std::string probes;
  for (std::size_t k = 0; k < c.schedule.probes.size(); ++k) probes += (k ? "; " : "") + join_reals(c.schedule.probes[k]);
  line("probes", probes);
  o += "\n[run]\n";
  line("seed", std::to_string(c.run.seed));
  line("threads", std::to_string(c.run.threads));
  line("out", c.run.out);
  o += "\n[a3]\n";
  line("p", std::to_string(c.a3.p));
  std::string fam;
  for (std::size_t k = 0; k < c.a3.families.size(); ++k)
    fam += fmt::format("{}{}:{:.17g}", k ? "," : "", c.a3.families[k].first, c.a3.families[k].second);
  line("families", fam);
  o += "\n[appendix]\n";
  line("constant", real(c.appendix.constant));
  line("beta", real(c.appendix.beta));
  line("t", real(c.appendix.t));
  line("fine_steps", std::to_string(c.appendix.fine_steps));
  line("coarse_steps", std::to_string(c.appendix.coarse_steps));
  line("paths", std::to_string(c.appendix.paths));
  line("eps0", real(c.appendix.eps0));
  line("fubini_steps", std::to_string(c.appendix.fubini_steps));
  line("fubini_paths", std::to_string(c.appendix.fubini_paths));
  o += "\n[upsilon]\n";
  line("volumes", join_ints(c.upsilon.volumes));
  line("y_min", real(c.upsilon.y_min));
  line("y_max", real(c.upsilon.y_max));
  line("y_points", std::to_string(c.upsilon.y_points));
  line("quadrature_order", std::to_string(c.upsilon.quadrature_order));
  line("x", join_reals(c.upsilon.x));
  o += "\n[sampler]\n";
  line("samples", std::to_string(c.sampler.samples));
  line("burn_in", std::to_string(c.sampler.burn_in));
  line("thin", std::to_string(c.sampler.thin));
  line("mgf_points", join_reals(c.sampler.mgf_points));
  o += "\n[weights]\n";
  line("decay_max_size", std::to_string(c.weights.decay_max_size));
  line("zero_weights", c.weights.zero_weights ? "true" : "false");
  return o;
}

// ---------------------------------------------------------------------------
// Model construction

Box model_box(const ModelConfig& m) {
  return Box(Site(std::span<const int>(m.box_lo)), Site(std::span<const int>(m.box_hi)));
}

InteractionSpec model_interaction(const ModelConfig& m) {
  if (m.interaction == "zero") return zero_interaction();
  if (m.interaction == "stock") return stock_interaction(m.coupling, m.single_site, m.range, m.metric);
  if (m.interaction == "cos_pair") return cos_pair_interaction(m.coupling, m.range, m.metric);
  if (m.interaction == "cos_single") return cos_single_interaction(m.single_site);
  throw ConfigError(fmt::format("unknown interaction '{}'", m.interaction));
}

AprioriMeasure model_apriori(const ModelConfig& m) {
  if (m.apriori == "gaussian") return AprioriMeasure::gaussian(m.apriori_sigma);
  if (m.apriori == "quartic") return AprioriMeasure::from_log_density("quartic", [](double x) { return -x * x * x * x; });
  throw ConfigError(fmt::format("unknown a priori measure '{}'", m.apriori));
}

DriftSpec make_drift(const std::string& family, double strength, const DriftConfig& extra, int dim) {
  if (family == "zero") return zero_drift(dim);
  if (family == "constant") return constant_drift(strength, dim);
  if (family == "markov_tanh") return markov_tanh_drift(strength);
  if (family == "linear_clipped") return linear_clipped_drift(strength, extra.bound);
  if (family == "long_memory") return long_memory_drift(strength);
  if (family == "long_memory_const") return long_memory_const_drift(strength);
  if (family == "spacetime_kernel") {
    const Integrator v = extra.integrator == "two_jump"
                             ? two_jump_integrator(extra.jumps[0], extra.jumps[1], extra.jumps[2], extra.jumps[3])
                             : lebesgue_integrator();
    return spacetime_kernel_drift(strength, v);
  }
  throw ConfigError(fmt::format("unknown drift family '{}'", family));
}

DriftSpec model_drift(const ExperimentConfig& c) { return make_drift(c.drift.family, c.drift.strength, c.drift, c.model.dim); }

std::vector<Configuration> probe_configurations(const ScheduleConfig& s, const Box& box) {
  std::vector<Configuration> out;
  if (!s.probes.empty()) {
    for (const auto& p : s.probes) out.emplace_back(box, p);
    return out;
  }
  const std::size_t n = box.size();
  if (s.probe_mode == "grid") {
    const std::size_t q = s.probe_values.size();
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) {
      total *= q;
      if (total > 100000) throw ConfigError("probe grid larger than 1e5 configurations; use probe_mode = patterns");
    }
    for (std::size_t flat = 0; flat < total; ++flat) {
      Configuration x(box);
      std::size_t rem = flat;
      for (std::size_t k = 0; k < n; ++k) {
        x.values()[k] = s.probe_values[rem % q];
        rem /= q;
      }
      out.push_back(std::move(x));
    }
    return out;
  }
  // Uniform configurations, then the two alternating sign patterns of every nonzero |value|.
  for (double v : s.probe_values) out.emplace_back(box, v);
  std::vector<double> mags;
  for (double v : s.probe_values)
    if (v != 0.0 && std::find(mags.begin(), mags.end(), std::abs(v)) == mags.end()) mags.push_back(std::abs(v));
  if (n > 1) {
    for (double a : mags)
      for (int sign : {1, -1}) {
        Configuration x(box);
        for (std::size_t k = 0; k < n; ++k) {
          const Site s_k = box.site_at(k);
          int parity = 0;
          for (int ax = 0; ax < s_k.dim(); ++ax) parity += s_k[ax];
          x.values()[k] = ((parity % 2 == 0) ? sign : -sign) * a;
        }
        out.push_back(std::move(x));
      }
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"weights",           "kp-check",        "series-vs-oracle", "a3-decay",
                                              "upsilon-stability", "appendix-checks", "gibbs-sample"};
  return names;
}

bool RunResult::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const CriterionRow& r) { return r.pass; });
}

int exit_code(const RunResult& result) { return result.all_pass() ? 0 : 1; }

// ---------------------------------------------------------------------------
// Runners

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::string config_values(const Configuration& x) {
  std::string s;
  for (std::size_t k = 0; k < x.values().size(); ++k) s += fmt::format("{}{:.17g}", k ? ";" : "", x.values()[k]);
  return s;
}

/// Stream tag for item (a, b) of a named experiment: mix(mix(fnv1a(name), a), b).
std::uint64_t stream_tag(std::string_view name, std::uint64_t a, std::uint64_t b = 0) {
  return mix_tag(mix_tag(fnv1a(name), a), b);
}

CriterionRow row(std::string criterion, std::string check, double value, std::string relation, double threshold) {
  bool pass = false;
  if (relation == "<=") pass = value <= threshold;
  else if (relation == "<") pass = value < threshold;
  else if (relation == ">=") pass = value >= threshold;
  else if (relation == ">") pass = value > threshold;
  else if (relation == "==") pass = value == threshold;
  else if (relation == "info") pass = true;
  return CriterionRow{std::move(criterion), std::move(check), value, std::move(relation), threshold, pass};
}

class Table {
 public:
  explicit Table(std::string header) : text_(std::move(header) + "\n") {}
  template <class... Args>
  void add(Args&&... cells) {
    std::string line;
    ((line += (line.empty() ? "" : ",") + cell(std::forward<Args>(cells))), ...);
    text_ += line + "\n";
  }
  const std::string& text() const { return text_; }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  std::string text_;
};

struct Artifacts {
  std::vector<std::pair<std::string, std::string>> tables;
  std::vector<CriterionRow> rows;

  void table(std::string name, const Table& t) { tables.emplace_back(std::move(name), t.text()); }
};

PathSampling make_sampling(const ExperimentConfig& c, double t, std::uint64_t tag) {
  PathSampling s;
  s.t = t;
  s.steps = c.schedule.steps;
  s.n_paths = c.schedule.paths;
  s.root_seed = c.run.seed;
  s.stream_tag = tag;
  return s;
}

bool interaction_is_zero(const InteractionSpec& spec) { return !spec.has_single_site() && !spec.has_pair(); }

void series_vs_oracle(const ExperimentConfig& c, Artifacts& art) {
  const Box box = model_box(c.model);
  const auto spec = model_interaction(c.model);
  const auto apriori = model_apriori(c.model);
  const auto drift = model_drift(c);
  const auto probes = probe_configurations(c.schedule, box);
  const auto vocab = build_polymer_vocabulary(box, drift, spec);
  const auto plan = make_series_plan(vocab, c.schedule.max_polymers, std::nullopt, c.schedule.count_limit);
  const bool identity = drift.is_zero() && interaction_is_zero(spec);
  const bool convolution = !identity && box.size() == 1 && drift.is_zero() && !spec.has_pair();

  Table table("t,probe,x,reference,oracle,oracle_se,series,series_se,exp_series,exact,oracle_rel_err,score");
  Table terms("t,probe,order,contribution");
  double worst_identity = 0.0, worst_rel_apriori = 0.0, worst_rel_lebesgue = 0.0, worst_score = 0.0;
  double worst_series_conv = 0.0;
  for (std::size_t ti = 0; ti < c.schedule.t.size(); ++ti) {
    const double t = c.schedule.t[ti];
    for (std::size_t k = 0; k < probes.size(); ++k) {
      const auto& x = probes[k];
      const auto so = make_sampling(c, t, stream_tag("series-vs-oracle/oracle", ti, k));
      const auto ss = make_sampling(c, t, stream_tag("series-vs-oracle/series", ti, k));
      const auto oracle = oracle_density_ratio(x, drift, spec, apriori, so, DensityReference::Lebesgue);
      const auto series = evaluate_series(plan, vocab, drift, spec, x, ss);
      for (const auto& [order, value] : series.by_order) terms.add(t, k, order, value);
      const double es = std::exp(series.value);
      const double combined = std::hypot(es * series.std_error, oracle.ratio.std_error);
      const double diff = std::abs(es - oracle.ratio.mean);
      const double score = combined > 0.0 ? diff / combined : (diff == 0.0 ? 0.0 : INFINITY);
      if (identity) {
        double rev = 0.0;
        const TimeGrid grid(t, c.schedule.steps);
        for (std::size_t s = 0; s < std::min<std::size_t>(c.schedule.paths, 1000); ++s) {
          const auto path = sample_brownian(x, grid, so.stream(s));
          for (const auto& site : box.sites()) rev = std::max(rev, std::abs(reversed_F(drift, site, path)));
        }
        worst_identity = std::max({worst_identity, oracle.mean_abs_deviation, std::abs(oracle.ratio.mean - 1.0),
                                   std::abs(series.value), rev});
        table.add(t, k, config_values(x), "lebesgue", oracle.ratio.mean, oracle.ratio.std_error, series.value,
                  series.std_error, es, 1.0, std::abs(oracle.ratio.mean - 1.0), score);
      } else if (convolution) {
        const auto psi = [&](double y) { return spec.single_site(y); };
        const double x0 = x.values()[0];
        const double exact_l = convolution_ratio(psi, apriori, x0, t, DensityReference::Lebesgue);
        const double exact_a = convolution_ratio(psi, apriori, x0, t, DensityReference::Apriori);
        const auto oracle_a = oracle_density_ratio(x, drift, spec, apriori, so, DensityReference::Apriori);
        const double rel_l = std::abs(oracle.ratio.mean - exact_l) / exact_l;
        const double rel_a = std::abs(oracle_a.ratio.mean - exact_a) / exact_a;
        worst_rel_lebesgue = std::max(worst_rel_lebesgue, rel_l);
        worst_rel_apriori = std::max(worst_rel_apriori, rel_a);
        const double series_score = std::abs(es - exact_l) / std::max(es * series.std_error, 1e-300);
        worst_series_conv = std::max(worst_series_conv, series_score);
        table.add(t, k, config_values(x), "lebesgue", oracle.ratio.mean, oracle.ratio.std_error, series.value,
                  series.std_error, es, exact_l, rel_l, series_score);
        table.add(t, k, config_values(x), "apriori", oracle_a.ratio.mean, oracle_a.ratio.std_error, "", "", "", exact_a,
                  rel_a, "");
      } else {
        worst_score = std::max(worst_score, score);
        table.add(t, k, config_values(x), "lebesgue", oracle.ratio.mean, oracle.ratio.std_error, series.value,
                  series.std_error, es, "", "", score);
      }
    }
  }
  art.table("series_vs_oracle.csv", table);
  art.table("series_terms.csv", terms);
  if (identity) {
    art.rows.push_back(row("1", "max |R-1|, |series|, |reversed_F| (zero drift, zero interaction)", worst_identity, "==", 0.0));
  } else if (convolution) {
    art.rows.push_back(row("2", "max relative error, oracle vs convolution (a priori reference)", worst_rel_apriori, "<=", 0.01));
    art.rows.push_back(row("2", "max relative error, oracle vs convolution (Lebesgue reference)", worst_rel_lebesgue, "<=", 0.01));
    art.rows.push_back(row("2", "max |exp(series) - convolution| / se (Lebesgue reference)", worst_series_conv, "info", 3.0));
  } else {
    art.rows.push_back(row("3", "max |exp(series) - oracle| / combined se", worst_score, "<=", 3.0));
    art.rows.push_back(row("3", "paths per estimate", static_cast<double>(c.schedule.paths), ">=", 1e5));
  }
}

void appendix_checks(const ExperimentConfig& c, Artifacts& art) {
  const auto& a = c.appendix;
  const std::uint64_t seed = c.run.seed;
  Table reversal("drift,path,closed_form,reversed_F,abs_diff,backward_identity_residual");
  double worst_const = 0.0, worst_identity = 0.0, mean_tanh = 0.0;
  {
    const auto d = constant_drift(a.constant);
    const Configuration x(Box::chain(0, 0), 0.0);
    const TimeGrid grid(a.t, a.fine_steps);
    for (std::size_t s = 0; s < a.paths; ++s) {
      const auto p = sample_brownian(x, grid, SeedStream{seed, derive_stream_index(stream_tag("appendix/reversal-constant", 0), s)});
      const double closed = markov_reversed_closed_form(d, Site{0}, p);
      const double rev = reversed_F(d, Site{0}, p);
      worst_const = std::max(worst_const, std::abs(closed - rev));
      reversal.add("constant", s, closed, rev, std::abs(closed - rev), "");
    }
  }
  {
    const auto d = markov_tanh_drift(a.beta);
    const Configuration x(Box::chain(-1, 1), 0.0);
    const TimeGrid grid(a.t, a.fine_steps);
    for (std::size_t s = 0; s < a.paths; ++s) {
      const auto p = sample_brownian(x, grid, SeedStream{seed, derive_stream_index(stream_tag("appendix/reversal-tanh", 0), s)});
      const double closed = markov_reversed_closed_form(d, Site{0}, p);
      const double rev = reversed_F(d, Site{0}, p);
      const auto parts = markov_reversal_parts(d, Site{0}, p);
      const double residual = std::abs(-parts.backward - (parts.ito - 2.0 * parts.stratonovich));
      worst_identity = std::max(worst_identity, residual);
      mean_tanh += std::abs(closed - rev) / static_cast<double>(a.paths);
      reversal.add("markov_tanh", s, closed, rev, std::abs(closed - rev), residual);
    }
  }
  Table conv("steps,mean_abs_diff");
  {
    // Coarse-grid gap, for the convergence picture only.
    const auto d = markov_tanh_drift(a.beta);
    const Configuration x(Box::chain(-1, 1), 0.0);
    for (int m = a.coarse_steps; m <= a.fine_steps; m *= 4) {
      const TimeGrid grid(a.t, m);
      double acc = 0.0;
      for (std::size_t s = 0; s < a.paths; ++s) {
        const auto p = sample_brownian(x, grid, SeedStream{seed, derive_stream_index(stream_tag("appendix/reversal-convergence", m), s)});
        acc += std::abs(markov_reversed_closed_form(d, Site{0}, p) - reversed_F(d, Site{0}, p));
      }
      conv.add(m, acc / static_cast<double>(a.paths));
    }
  }
  Table fubini("path,fubini,double_sum,abs_diff");
  double worst_fubini = 0.0;
  {
    const auto d = long_memory_drift(a.eps0);
    const Configuration x(Box::chain(0, 0), 0.0);
    const TimeGrid grid(a.t, a.fubini_steps);
    for (std::size_t s = 0; s < a.fubini_paths; ++s) {
      const auto p = sample_brownian(x, grid, SeedStream{seed, derive_stream_index(stream_tag("appendix/fubini", 0), s)});
      const double fub = longmem_J_fubini(d, Site{0}, p);
      const auto b = bind_drift(d, Site{0}, p);
      double dbl = 0.0;
      for (int j = 1; j <= grid.steps(); ++j) dbl += eval_drift(b, j - 1, PathView(p)) * (p(j, 0) - p(j - 1, 0));
      worst_fubini = std::max(worst_fubini, std::abs(fub - dbl));
      fubini.add(s, fub, dbl, std::abs(fub - dbl));
    }
  }
  art.table("reversal.csv", reversal);
  art.table("reversal_convergence.csv", conv);
  art.table("fubini.csv", fubini);
  art.rows.push_back(row("4", "constant drift: max |closed form - reversed_F| per path", worst_const, "<=", 1e-12));
  art.rows.push_back(row("4", fmt::format("tanh drift, M={}: mean |closed form - reversed_F|", a.fine_steps), mean_tanh, "<=", 0.05));
  art.rows.push_back(row("4", "max |-B - (L - 2S)| per path", worst_identity, "<=", 1e-12));
  art.rows.push_back(row("5", "max |Fubini single sum - double sum| per path", worst_fubini, "<=", 1e-12));
}

void a3_decay(const ExperimentConfig& c, Artifacts& art) {
  std::vector<double> ts = c.schedule.t;
  std::sort(ts.begin(), ts.end(), std::greater<>());
  Table table("family,strength,t,p,moment,std_error,n_paths");
  for (std::size_t f = 0; f < c.a3.families.size(); ++f) {
    const auto& [name, strength] = c.a3.families[f];
    const auto d = make_drift(name, strength, c.drift, 1);
    int lo = 0, hi = 0;
    for (const auto& s : d.neighborhood) {
      lo = std::min(lo, s[0]);
      hi = std::max(hi, s[0]);
    }
    const Configuration x(Box::chain(lo, hi), 0.0);
    std::vector<MeanEstimate> m;
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      m.push_back(a3_moment_estimate(d, x, ts[ti], c.schedule.steps, c.schedule.paths, c.a3.p, c.run.seed,
                                     stream_tag("a3-decay", f, ti)));
      table.add(name, strength, ts[ti], c.a3.p, m.back().mean, m.back().std_error, m.back().count);
    }
    double min_sep = INFINITY;
    for (std::size_t k = 0; k + 1 < m.size(); ++k) {
      const double se = std::hypot(m[k].std_error, m[k + 1].std_error);
      const double gap = m[k].mean - m[k + 1].mean;
      min_sep = std::min(min_sep, se > 0.0 ? gap / se : (gap > 0.0 ? INFINITY : -INFINITY));
    }
    if (m.size() >= 2) {
      art.rows.push_back(row("6", fmt::format("{}: min separation of consecutive t in std errors (decreasing)", name), min_sep, ">=", 3.0));
      art.rows.push_back(row("6", fmt::format("{}: moment(t={}) / moment(t={})", name, ts.back(), ts.front()),
                             m.front().mean > 0.0 ? m.back().mean / m.front().mean : INFINITY, "<=", 0.1));
    }
  }
  art.table("a3_decay.csv", table);
}

struct Sweep {
  PolymerVocabulary vocab;
  std::vector<Cluster> clusters;
  std::vector<Configuration> probes;
  std::vector<double> ts;
  std::vector<std::vector<double>> sup;  ///< per t, per cluster: max over probes of |w|
};

Sweep weight_sweep(const ExperimentConfig& c, Table* table, bool zero_weights) {
  const Box box = model_box(c.model);
  const auto spec = model_interaction(c.model);
  const auto drift = model_drift(c);
  Sweep sw{build_polymer_vocabulary(box, drift, spec), {}, probe_configurations(c.schedule, box), c.schedule.t, {}};
  sw.clusters = enumerate_clusters(sw.vocab, std::nullopt, c.schedule.max_polymers, c.schedule.count_limit);
  for (std::size_t ti = 0; ti < sw.ts.size(); ++ti) {
    std::vector<double> sup(sw.clusters.size(), 0.0);
    if (!zero_weights) {
      for (std::size_t k = 0; k < sw.probes.size(); ++k) {
        const auto s = make_sampling(c, sw.ts[ti], stream_tag("weights", ti, k));
        const auto w = estimate_weights(sw.vocab, sw.clusters, drift, spec, sw.probes[k], s);
        for (std::size_t q = 0; q < w.size(); ++q) {
          sup[q] = std::max(sup[q], std::abs(w[q].value));
          if (table)
            table->add(q, describe(sw.clusters[q], sw.vocab), sw.clusters[q].size(), sw.clusters[q].count(), sw.ts[ti], k,
                       w[q].value, w[q].std_error, w[q].n_paths);
        }
      }
    }
    sw.sup.push_back(std::move(sup));
  }
  return sw;
}

void weights_cmd(const ExperimentConfig& c, Artifacts& art) {
  Table table("cluster,polymers,size,polymer_count,t,probe,estimate,std_error,n_paths");
  const Sweep sw = weight_sweep(c, &table, false);
  Table probes("probe,x");
  for (std::size_t k = 0; k < sw.probes.size(); ++k) probes.add(k, config_values(sw.probes[k]));
  Table decay("t,size,max_abs_weight");
  Table fits("t,c_hat,lambda_hat,c_hat_free_intercept,intercept,c_min,finite");
  std::vector<std::pair<double, double>> c_hat;  // (t, c_hat)
  for (std::size_t ti = 0; ti < sw.ts.size(); ++ti) {
    const auto fit = weight_decay_diagnostic(sw.clusters, sw.sup[ti], c.weights.decay_max_size);
    for (std::size_t k = 0; k < fit.sizes.size(); ++k) decay.add(sw.ts[ti], fit.sizes[k], fit.max_abs[k]);
    fits.add(sw.ts[ti], fit.c_hat, fit.lambda_hat, fit.c_hat_intercept, fit.intercept, fit.c_min, fit.finite);
    c_hat.emplace_back(sw.ts[ti], fit.c_hat);
    art.rows.push_back(row("7", fmt::format("c_hat(t={}) from sizes 1-{}", sw.ts[ti], c.weights.decay_max_size), fit.c_hat, ">", 0.0));
  }
  std::sort(c_hat.begin(), c_hat.end());
  for (std::size_t k = 0; k + 1 < c_hat.size(); ++k)
    art.rows.push_back(row("7", fmt::format("c_hat(t={}) - c_hat(t={})", c_hat[k].first, c_hat[k + 1].first),
                           c_hat[k].second - c_hat[k + 1].second, ">", 0.0));
  art.rows.push_back(row("7", "paths per weight", static_cast<double>(c.schedule.paths), ">=", 1e5));
  art.table("weights.csv", table);
  art.table("probes.csv", probes);
  art.table("decay.csv", decay);
  art.table("decay_fit.csv", fits);
}

void kp_cmd(const ExperimentConfig& c, Artifacts& art) {
  const Sweep sw = weight_sweep(c, nullptr, c.weights.zero_weights);
  Table rows("t,cluster,polymers,size,lhs,pass");
  Table summary("t,all_pass,worst_margin,worst_cluster,clusters,truncated_polymer_cap");
  double largest = 0.0, largest_small = 0.0;
  for (std::size_t ti = 0; ti < sw.ts.size(); ++ti) {
    const auto report = kp_check(sw.clusters, sw.sup[ti]);
    for (const auto& r : report.rows) rows.add(sw.ts[ti], r.cluster, describe(sw.clusters[r.cluster], sw.vocab), r.size, r.lhs, r.pass);
    summary.add(sw.ts[ti], report.all_pass, report.worst_margin, report.worst_cluster, sw.clusters.size(), c.schedule.max_polymers);
    if (report.all_pass) {
      largest = std::max(largest, sw.ts[ti]);
      if (sw.ts[ti] <= 0.05) largest_small = std::max(largest_small, sw.ts[ti]);
    }
  }
  art.table("kp.csv", rows);
  art.table("kp_summary.csv", summary);
  art.rows.push_back(row("8", "largest schedule t where every cluster passes (0 = none)", largest, "info", 0.0));
  art.rows.push_back(row("8", "largest passing t <= 0.05 (0 = none)", largest_small, ">", 0.0));
}

void upsilon_cmd(const ExperimentConfig& c, Artifacts& art) {
  const auto spec = model_interaction(c.model);
  const auto apriori = model_apriori(c.model);
  const auto drift = model_drift(c);
  const auto& u = c.upsilon;
  std::vector<int> volumes = u.volumes;
  std::sort(volumes.begin(), volumes.end());
  const int half = volumes.back() / 2;
  Configuration x(Box::chain(-half, half));
  const auto n_x = static_cast<long>(u.x.size());
  for (int j = -half; j <= half; ++j) x.set(Site{j}, u.x[static_cast<std::size_t>(((j % n_x) + n_x) % n_x)]);
  std::vector<double> ys;
  for (int k = 0; k < u.y_points; ++k) ys.push_back(u.y_min + (u.y_max - u.y_min) * k / (u.y_points - 1));

  Table values("t,volume,y,upsilon,time_t_potential");
  Table diffs("t,volume_a,volume_b,sup_abs_diff");
  Table norms("t,volume,integral,log_normalizer,clusters,terms");
  for (std::size_t ti = 0; ti < c.schedule.t.size(); ++ti) {
    const double t = c.schedule.t[ti];
    // One stream for every volume: common random numbers on shared sites.
    const auto sampling = make_sampling(c, t, stream_tag("upsilon", ti));
    std::vector<std::vector<double>> curves;
    for (int n : volumes) {
      const Box box = Box::centered_chain(n);
      const auto vocab = build_polymer_vocabulary(box, drift, spec);
      const UpsilonKernel kernel(vocab, drift, spec, apriori, Site{0}, x.restricted(box), c.schedule.max_polymers, sampling,
                                 u.quadrature_order);
      std::vector<double> curve;
      for (double y : ys) {
        const double h = kernel.time_t_potential(y);
        curve.push_back(std::exp(-h - kernel.log_normalizer()));
        values.add(t, n, y, curve.back(), h);
      }
      const double integral = kernel.normalization_check(apriori);
      norms.add(t, n, integral, kernel.log_normalizer(), kernel.plan().clusters.size(), kernel.plan().terms.size());
      art.rows.push_back(row("9", fmt::format("t={} volume {}: |integral of Upsilon dm - 1|", t, n), std::abs(integral - 1.0), "<=", 1e-6));
      curves.push_back(std::move(curve));
    }
    std::vector<double> sup;
    for (std::size_t k = 0; k + 1 < curves.size(); ++k) {
      double d = 0.0;
      for (std::size_t q = 0; q < ys.size(); ++q) d = std::max(d, std::abs(curves[k][q] - curves[k + 1][q]));
      sup.push_back(d);
      diffs.add(t, volumes[k], volumes[k + 1], d);
    }
    for (std::size_t k = 0; k + 1 < sup.size(); ++k)
      art.rows.push_back(row("9", fmt::format("t={}: sup diff {}/{} minus sup diff {}/{}", t, volumes[k + 1], volumes[k + 2],
                                              volumes[k], volumes[k + 1]),
                             sup[k + 1] - sup[k], "<", 0.0));
  }
  art.table("upsilon.csv", values);
  art.table("upsilon_diff.csv", diffs);
  art.table("upsilon_norm.csv", norms);
}

void gibbs_cmd(const ExperimentConfig& c, Artifacts& art) {
  const GibbsSpec g{model_box(c.model), model_interaction(c.model), model_apriori(c.model), std::nullopt};
  SamplerOptions o;
  o.burn_in = c.sampler.burn_in;
  o.thin = c.sampler.thin;
  const auto batch = sample_gibbs(g, c.sampler.samples, mix_tag(c.run.seed, fnv1a("gibbs-sample")), o);
  Table samples([&] {
    std::string h;
    for (const auto& s : g.box.sites()) h += (h.empty() ? "" : ",") + fmt::format("x({})", s.to_string());
    return h;
  }());
  const std::size_t n = g.box.size();
  for (std::size_t k = 0; k < batch.count(); ++k) {
    std::string line;
    for (std::size_t q = 0; q < n; ++q) line += (q ? "," : "") + num(batch.values[k * n + q]);
    samples.add(line);
  }
  Table ks("site,ks_distance,samples,acceptance_rate,step");
  for (const auto& site : g.box.sites()) {
    const MarginalCdf cdf(g, site);
    const double d = ks_distance(batch.marginal(site), [&](double y) { return cdf(y); });
    ks.add(site.to_string(), d, batch.count(), batch.acceptance_rate, batch.step);
    art.rows.push_back(row("10", fmt::format("site {}: KS distance to the quadrature marginal", site.to_string()), d, "<=", 0.01));
  }
  Table mgf("a,closed_form,quadrature,abs_err");
  double worst = 0.0;
  for (double a : c.sampler.mgf_points) {
    auto f = [a](double z) { return std::exp(a * z - 0.5 * z * z) / std::sqrt(2.0 * M_PI); };
    const double quad = 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, INFINITY, 15, 1e-15);
    const double closed = gaussian_abs_mgf(a);
    worst = std::max(worst, std::abs(closed - quad));
    mgf.add(a, closed, quad, std::abs(closed - quad));
  }
  art.rows.push_back(row("10", "max |gaussian_abs_mgf - quadrature|", worst, "<=", 1e-10));
  art.table("samples.csv", samples);
  art.table("ks.csv", ks);
  art.table("mgf.csv", mgf);
}

void check_command_config(const std::string& command, const ExperimentConfig& c) {
  const std::size_t volume = model_box(c.model).size();
  if (command == "gibbs-sample" && volume > 2)
    throw ConfigError(fmt::format("gibbs-sample compares against quadrature marginals and needs at most 2 sites, got {}", volume));
  if (command == "upsilon-stability") {
    if (c.model.dim != 1) throw ConfigError("upsilon-stability runs on chains (dim = 1)");
  }
  if (command == "a3-decay" && c.a3.families.empty()) throw ConfigError("a3.families is empty");
  if (command == "series-vs-oracle" || command == "weights" || command == "kp-check") (void)probe_configurations(c.schedule, model_box(c.model));
  // Building the model objects surfaces remaining contract violations as configuration errors.
  try {
    (void)model_interaction(c.model);
    (void)model_drift(c);
    for (const auto& [name, strength] : c.a3.families) (void)make_drift(name, strength, c.drift, 1);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", file.string()));
  out << text;
}

}  // namespace

RunResult run_experiment(const std::string& command, ExperimentConfig config, const RunOverrides& overrides,
                         const std::string& config_label) {
  if (std::find(subcommands().begin(), subcommands().end(), command) == subcommands().end())
    throw ConfigError(fmt::format("unknown subcommand '{}'", command));
  if (overrides.seed) config.run.seed = *overrides.seed;
  if (overrides.out) config.run.out = *overrides.out;
  if (overrides.threads) {
    if (*overrides.threads < 1) throw ConfigError("--threads must be >= 1");
    config.run.threads = *overrides.threads;
  }
  check_command_config(command, config);
  set_worker_threads(config.run.threads);

  const std::string started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  Artifacts art;
  if (command == "series-vs-oracle") series_vs_oracle(config, art);
  else if (command == "appendix-checks") appendix_checks(config, art);
  else if (command == "a3-decay") a3_decay(config, art);
  else if (command == "weights") weights_cmd(config, art);
  else if (command == "kp-check") kp_cmd(config, art);
  else if (command == "upsilon-stability") upsilon_cmd(config, art);
  else if (command == "gibbs-sample") gibbs_cmd(config, art);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  RunResult result;
  result.rows = art.rows;
  result.wall_seconds = wall;
  result.out_dir = config.run.out;
  std::filesystem::create_directories(result.out_dir);
  for (const auto& [name, text] : art.tables) {
    write_file(result.out_dir / name, text);
    result.tables.push_back(name);
  }
  std::string summary = "criterion\tcheck\tvalue\trelation\tthreshold\tresult\n";
  for (const auto& r : art.rows)
    summary += fmt::format("{}\t{}\t{:.17g}\t{}\t{:.17g}\t{}\n", r.criterion, r.check, r.value, r.relation, r.threshold,
                           r.pass ? "pass" : "fail");
  write_file(result.out_dir / "summary.tsv", summary);

  const std::string canonical = serialize_config(config);
  std::string tables;
  for (const auto& t : result.tables) tables += (tables.empty() ? "" : ",") + t;
  std::string manifest;
  manifest += fmt::format("command\t{}\n", command);
  manifest += fmt::format("config\t{}\n", config_label);
  manifest += fmt::format("config_hash_fnv1a64\t{:016x}\n", fnv1a(canonical));
  manifest += fmt::format("seed\t{}\n", config.run.seed);
  manifest += fmt::format("threads\t{}\n", worker_threads());
  manifest += fmt::format("gibbsflow\t{}\n", kVersion);
#if defined(__clang__)
  manifest += fmt::format("compiler\tclang {}\n", __clang_version__);
#elif defined(__GNUC__)
  manifest += fmt::format("compiler\tgcc {}\n", __VERSION__);
#else
  manifest += "compiler\tunknown\n";
#endif
  manifest += fmt::format("fmt\t{}\n", FMT_VERSION);
  manifest += fmt::format("boost\t{}\n", BOOST_LIB_VERSION);
  manifest += fmt::format("openmp\t{}\n", _OPENMP);
  manifest += fmt::format("started_utc\t{}\n", started);
  manifest += fmt::format("wall_seconds\t{:.3f}\n", wall);
  manifest += fmt::format("tables\t{}\n", tables);
  manifest += fmt::format("result\t{}\n", result.all_pass() ? "pass" : "fail");
  write_file(result.out_dir / "manifest.txt", manifest);
  return result;
}

}  // namespace gibbsflow
