#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "libration/errors.hpp"

namespace libration::cli {

namespace {

struct TolKey {
  std::string name;
  bool integer;
  double min;  // integers only; reals must be > 0
  std::function<double(const ProblemConfig&)> get;
  std::function<void(ProblemConfig&, double)> set;
};

#define REAL(key, member)                                                   \
  TolKey {                                                                  \
    key, false, 0.0, [](const ProblemConfig& c) { return c.member; },       \
        [](ProblemConfig& c, double v) { c.member = v; }                    \
  }
#define COUNT(key, member, lo, type)                                                   \
  TolKey {                                                                             \
    key, true, lo, [](const ProblemConfig& c) { return static_cast<double>(c.member); }, \
        [](ProblemConfig& c, double v) { c.member = static_cast<type>(v); }            \
  }

const std::vector<TolKey>& table() {
  static const std::vector<TolKey> keys{
      REAL("prereq.rtol", prereq.rtol),
      REAL("prereq.atol", prereq.atol),
      COUNT("prereq.uniform_intervals", prereq.uniform_intervals, 16, std::size_t),
      REAL("prereq.max_time", prereq.max_time),
      REAL("prereq.invariant_tol", prereq.invariant_tol),
      COUNT("oracle.steps_per_period", oracle.steps_per_period, 16, std::size_t),
      REAL("oracle.max_periods", oracle.max_periods),
      REAL("oracle.h_qp", oracle.h_qp),
      REAL("oracle.h_eps", oracle.h_eps),
      REAL("oracle.h_delta", oracle.h_delta),
      COUNT("oracle.richardson_levels", oracle.richardson_levels, 2, int),
      REAL("compare.tol_first", compare.tol_first),
      REAL("compare.tol_second", compare.tol_second),
      REAL("compare.tol_third", compare.tol_third),
      REAL("compare.floor", compare.floor),
      REAL("classify.singular", classify.singular),
      REAL("classify.prime", classify.prime),
      REAL("classify.transcritical", classify.transcritical),
      REAL("classify.fork", classify.fork),
      REAL("classify.guard", classify.guard),
      REAL("sweep.root_tolerance", sweep_options.root_tolerance),
      COUNT("sweep.max_iterations", sweep_options.max_iterations, 1, int),
      COUNT("sweep.threads", sweep_options.threads, 1, unsigned),
  };
  return keys;
}

#undef REAL
#undef COUNT

const TolKey& find_key(const std::string& key) {
  for (const auto& k : table())
    if (k.name == key) return k;
  throw ConfigError("unknown tolerance key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& what, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(what + ": '" + text + "' is not a finite number");
  return v;
}

int parse_int(const std::string& what, const std::string& text) {
  const std::string t = trim(text);
  int v = 0;
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc() || ptr != end)
    throw ConfigError(what + ": '" + text + "' is not an integer");
  return v;
}

bool parse_bool(const std::string& what, const std::string& text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError(what + ": '" + text + "' is not a boolean");
}

using Tree = boost::property_tree::ptree;

void read_problem(const Tree& s, ProblemConfig& c) {
  std::optional<double> lo, hi;
  std::optional<int> n;
  for (const auto& [key, node] : s) {
    const std::string v = node.get_value<std::string>();
    const std::string what = "[problem] " + key;
    if (key == "potential") c.potential = trim(v);
    else if (key == "deformation") c.deformation = trim(v);
    else if (key == "E0") c.energy0 = parse_real(what, v);
    else if (key == "epsilon0") c.epsilon0 = parse_real(what, v);
    else if (key == "sweep_lo") lo = parse_real(what, v);
    else if (key == "sweep_hi") hi = parse_real(what, v);
    else if (key == "sweep_samples") n = parse_int(what, v);
    else if (key == "classify_roots") c.classify_roots = parse_bool(what, v);
    else throw ConfigError("unknown key '" + key + "' in [problem]");
  }
  if (lo || hi || n) {
    if (!(lo && hi && n))
      throw ConfigError("[problem] sweep needs all of sweep_lo, sweep_hi and sweep_samples");
    c.sweep = SweepRange{*lo, *hi, *n};
  }
}

void read_formulas(const Tree& s, ProblemConfig& c) {
  for (const auto& [key, node] : s) {
    RowForm form;
    try {
      form = parse_row_form(trim(node.get_value<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("[formulas] " + key + ": " + e.what());
    }
    if (key == "g1_mixed") c.formulas.g1_mixed = form;
    else if (key == "g3_pure") c.formulas.g3_pure = form;
    else if (key == "g3_mixed") c.formulas.g3_mixed = form;
    else if (key == "third_order") c.formulas.third_order = form;
    else if (key == "delta_third") c.formulas.delta_third = form;
    else throw ConfigError("unknown key '" + key + "' in [formulas]");
  }
}

void read_output(const Tree& s, ProblemConfig& c) {
  for (const auto& [key, node] : s) {
    const std::string v = trim(node.get_value<std::string>());
    if (key == "format") c.format = parse_format(v);
    else if (key == "path") c.out_path = v;
    else throw ConfigError("unknown key '" + key + "' in [output]");
  }
}

}  // namespace

const char* to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::text: return "text";
  }
  return "?";
}

OutputFormat parse_format(const std::string& text) {
  if (text == "json") return OutputFormat::json;
  if (text == "csv") return OutputFormat::csv;
  if (text == "text") return OutputFormat::text;
  throw ConfigError("unknown output format '" + text + "' (json, csv or text)");
}

const std::vector<std::string>& tolerance_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

double tolerance_value(const ProblemConfig& config, const std::string& key) {
  return find_key(key).get(config);
}

void set_tolerance(ProblemConfig& config, const std::string& key, const std::string& value) {
  const TolKey& k = find_key(key);
  if (k.integer) {
    const int v = parse_int(key, value);
    if (v < k.min)
      throw ConfigError(key + " must be at least " + std::to_string(static_cast<int>(k.min)));
    k.set(config, v);
  } else {
    const double v = parse_real(key, value);
    if (!(v > 0.0)) throw ConfigError(key + " must be positive, got " + trim(value));
    k.set(config, v);
  }
}

void apply_override(ProblemConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--tol-override expects key=value, got '" + assignment + "'");
  set_tolerance(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ProblemConfig parse_config(const std::string& ini_text) {
  Tree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  ProblemConfig c;
  for (const auto& [name, section] : tree) {
    if (section.empty() && !section.data().empty())
      throw ConfigError("key '" + name + "' outside a section");
    if (name == "problem") read_problem(section, c);
    else if (name == "formulas") read_formulas(section, c);
    else if (name == "tolerances")
      for (const auto& [key, node] : section)
        set_tolerance(c, key, node.get_value<std::string>());
    else if (name == "output") read_output(section, c);
    else throw ConfigError("unknown section [" + name + "]");
  }
  return c;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate(const ProblemConfig& c) {
  if (c.potential.empty()) throw ConfigError("[problem] potential is required");
  if (c.epsilon0.has_value() == c.sweep.has_value())
    throw ConfigError("[problem] needs exactly one of epsilon0 or a sweep range");
  if (c.sweep) {
    if (c.sweep->samples < 2) throw ConfigError("[problem] sweep_samples must be at least 2");
    if (!(c.sweep->lo < c.sweep->hi)) throw ConfigError("[problem] sweep_lo must be below sweep_hi");
  }
}

}  // namespace libration::cli
