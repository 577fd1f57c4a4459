#include "app.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "libration/errors.hpp"
#include "libration/symexpr.hpp"
#include "report.hpp"

namespace libration::cli {

namespace {

// Output was written but the command still fails with `code`.
struct CommandFailure : std::runtime_error {
  CommandFailure(ExitCode c, const std::string& what) : std::runtime_error(what), code(c) {}
  ExitCode code;
};

struct Options {
  std::string config_path;
  std::string out_path;
  std::string format;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

// The logger writes to stderr; LIBRATION_LOG picks the level (default warn).
spdlog::logger& logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> log;
  std::call_once(once, [] {
    log = spdlog::stderr_logger_mt("libration");
    log->set_pattern("libration [%l] %v");
  });
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("LIBRATION_LOG"); env && *env) {
    const std::string name(env);
    const auto parsed = spdlog::level::from_str(name);
    if (parsed != spdlog::level::off || name == "off") level = parsed;
  }
  log->set_level(level);
  return *log;
}

ProblemConfig resolve(const Options& o) {
  ProblemConfig c = load_config(o.config_path);
  for (const auto& a : o.overrides) apply_override(c, a);
  if (!o.format.empty()) c.format = parse_format(o.format);
  if (!o.out_path.empty()) c.out_path = o.out_path;
  validate(c);
  c.sweep_options.prereq = c.prereq;
  return c;
}

Model build_model(const ProblemConfig& c) {
  try {
    Model m{SymbolicField::parse(c.potential, FieldKind::potential), std::nullopt};
    if (!c.deformation.empty())
      m.deformation = SymbolicField::parse(c.deformation, FieldKind::deformation);
    return m;
  } catch (const ParseError& e) {
    throw ConfigError(std::string("bad expression: ") + e.what());
  }
}

void emit(const ProblemConfig& c, std::ostream& out,
          const std::function<void(std::ostream&)>& write) {
  if (c.out_path.empty() || c.out_path == "-") {
    write(out);
    return;
  }
  std::ofstream file(c.out_path, std::ios::binary);
  if (!file) throw ConfigError("cannot write '" + c.out_path + "'");
  write(file);
  if (!file) throw std::runtime_error("writing '" + c.out_path + "' failed");
  logger().info("wrote {}", c.out_path);
}

void emit_json(const ProblemConfig& c, std::ostream& out, const Json& j) {
  emit(c, out, [&](std::ostream& s) { s << j.dump(2) << '\n'; });
}

// Random symplectic chart for the verify command; the seed makes it
// reproducible.
Chart random_chart(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> diag(0.5, 2.0), off(-0.5, 0.5);
  const double a = diag(rng), b = off(rng), c = off(rng);
  return Chart{{a, b, c, (1.0 + b * c) / a}};
}

int cmd_analyze(const Options& o, std::ostream& out, bool verify) {
  const ProblemConfig c = resolve(o);
  const Model model = build_model(c);
  const double eps0 = *c.epsilon0;

  logger().info("analyze: E0 = {}, eps0 = {}", c.energy0, eps0);
  const Analysis a = analyze(model, c.energy0, eps0, c.formulas, c.prereq);
  const BifurcationReport b = classify(a.derivatives, c.classify);
  logger().info("y_max = {}, T = {}, verdict {}", a.orbit.y_max, a.orbit.period,
                to_string(b.verdict));

  std::optional<Verification> v;
  if (verify) {
    v.emplace();
    v->chart = o.seed ? random_chart(*o.seed) : Chart::identity();
    const PoincareOracle oracle(model, c.energy0, eps0, a.orbit.y_max, c.oracle);
    const auto numeric = fd_derivatives(oracle, v->chart);
    v->report = compare(change_chart(a.derivatives, v->chart), numeric, c.compare);
  }

  const RunMeta meta{verify ? "verify" : "analyze", o.config_path, o.seed};
  const Verification* vp = v ? &*v : nullptr;
  switch (c.format) {
    case OutputFormat::json: emit_json(c, out, analysis_json(meta, c, a, b, vp)); break;
    case OutputFormat::csv:
      emit(c, out, [&](std::ostream& s) { write_analysis_csv(s, a, b, vp); });
      break;
    case OutputFormat::text:
      emit(c, out, [&](std::ostream& s) { write_analysis_text(s, c, a, b, vp); });
      break;
  }

  if (!v) return exit_ok;
  std::vector<std::string> failed;
  for (const auto& e : v->report.entries) {
    if (e.verdict == Verdict::fail) failed.push_back(e.key);
    if (e.verdict == Verdict::inconclusive)
      logger().warn("{} inconclusive: finite-difference estimate {:.2e} exceeds tolerance {:.2e}",
                    e.key, e.fd_error, e.tolerance);
  }
  if (failed.empty()) return exit_ok;
  std::string names;
  for (const auto& k : failed) names += (names.empty() ? "" : ", ") + k;
  throw CommandFailure(exit_verification, "verification failed for " + names);
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const ProblemConfig c = resolve(o);
  const Model model = build_model(c);
  const auto& r = *c.sweep;

  logger().info("sweep: eps in [{}, {}], {} samples", r.lo, r.hi, r.samples);
  const SweepResult result = sweep(model, c.energy0, r.lo, r.hi, r.samples, c.sweep_options);
  for (const auto& s : result.samples)
    if (s.error) logger().warn("sample eps = {} failed: {}", s.eps, *s.error);

  std::vector<CheckedRoot> roots;
  bool all_verified = true;
  for (const auto& root : result.roots) {
    CheckedRoot cr;
    cr.root = root;
    try {
      cr.recheck_trace = trace_only(model, c.energy0 + root.eps, c.prereq).trace;
      cr.verified = root.converged &&
                    std::abs(cr.recheck_trace - 2.0) <= c.sweep_options.root_tolerance;
      if (c.classify_roots) {
        const Analysis a = analyze(model, c.energy0, root.eps, c.formulas, c.prereq);
        cr.classification = classify(a.derivatives, c.classify);
      }
    } catch (const HypothesisError&) {
      throw;
    } catch (const std::exception& e) {
      cr.error = e.what();
    }
    if (!cr.verified) {
      all_verified = false;
      logger().error("root near eps = {} did not re-verify (trace {})", root.eps, cr.recheck_trace);
    }
    roots.push_back(std::move(cr));
  }

  const RunMeta meta{"sweep", o.config_path, o.seed};
  switch (c.format) {
    case OutputFormat::json: emit_json(c, out, sweep_json(meta, c, result, roots)); break;
    case OutputFormat::csv:
      emit(c, out, [&](std::ostream& s) { write_sweep_csv(s, result, roots); });
      break;
    case OutputFormat::text:
      emit(c, out, [&](std::ostream& s) { write_sweep_text(s, c, result, roots); });
      break;
  }
  if (!all_verified)
    throw CommandFailure(exit_numerical, "a refined root failed its re-check");
  return exit_ok;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("config", o.config_path, "problem definition (INI)")->required();
  sub->add_option("--out", o.out_path, "write the report here instead of stdout");
  sub->add_option("--format", o.format, "json, csv or text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  sub->add_option("--tol-override", o.overrides, "key=value, repeatable")->take_all()->allow_extra_args(false);
  sub->add_option("--seed", o.seed, "seed for the random chart of verify");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poincare map derivatives and bifurcations of straight-line librations",
               "libration"};
  app.require_subcommand(1);
  Options o;
  CLI::App* analyze_cmd = app.add_subcommand("analyze", "derivatives and bifurcation verdict");
  CLI::App* verify_cmd = app.add_subcommand("verify", "analyze and check against finite differences");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "trace over an energy range and its singular points");
  for (auto* sub : {analyze_cmd, verify_cmd, sweep_cmd}) add_common(sub, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*sweep_cmd) return cmd_sweep(o, out);
    return cmd_analyze(o, out, static_cast<bool>(*verify_cmd));
  } catch (const CommandFailure& e) {
    err << "libration: " << e.what() << '\n';
    return e.code;
  } catch (const ConfigError& e) {
    err << "libration: config error: " << e.what() << '\n';
    return exit_config;
  } catch (const HypothesisError& e) {
    err << "libration: hypothesis check failed: " << e.what() << '\n';
    return exit_hypothesis;
  } catch (const std::exception& e) {
    err << "libration: numerical failure: " << e.what() << '\n';
    return exit_numerical;
  }
}

}  // namespace libration::cli
