#include "report.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#ifndef LIBRATION_VERSION
#define LIBRATION_VERSION "unknown"
#endif

namespace libration::cli {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json formulas_json(const FormulaOptions& f) {
  return Json{{"g1_mixed", to_string(f.g1_mixed)},
              {"g3_pure", to_string(f.g3_pure)},
              {"g3_mixed", to_string(f.g3_mixed)},
              {"third_order", to_string(f.third_order)},
              {"delta_third", to_string(f.delta_third)}};
}

Json meta_json(const RunMeta& meta, const ProblemConfig& config) {
  Json tol = Json::object();
  for (const auto& key : tolerance_keys()) tol[key] = tolerance_value(config, key);
  Json m{{"tool", "libration"},
         {"version", LIBRATION_VERSION},
         {"command", meta.command},
         {"config", meta.config_path},
         {"seed", meta.seed ? Json(*meta.seed) : Json(nullptr)},
         {"formulas", formulas_json(config.formulas)},
         {"tolerances", std::move(tol)}};
  return m;
}

Json problem_json(const ProblemConfig& config) {
  Json p{{"potential", config.potential},
         {"deformation", config.deformation.empty() ? Json(nullptr) : Json(config.deformation)},
         {"E0", config.energy0}};
  if (config.epsilon0) p["epsilon0"] = *config.epsilon0;
  if (config.sweep) {
    p["sweep"] = Json{{"lo", config.sweep->lo},
                      {"hi", config.sweep->hi},
                      {"samples", config.sweep->samples},
                      {"classify_roots", config.classify_roots}};
  }
  return p;
}

Json derivatives_json(const PoincareDerivatives& d) {
  Json out = Json::object();
  for (std::size_t i = 0; i < kNumDerivatives; ++i)
    out[derivative_specs()[i].key] = number(d.values[i]);
  return out;
}

Json z_json(const std::map<MultiIndex, double>& z) {
  Json out = Json::object();
  for (const auto& [idx, v] : z) out[idx.to_string()] = number(v);
  return out;
}

Json chart_json(const Chart& c) {
  return Json::array({Json::array({c.s[0], c.s[1]}), Json::array({c.s[2], c.s[3]})});
}

Json bifurcation_json(const BifurcationReport& b) {
  Json out{{"verdict", to_string(b.verdict)},
           {"trace", number(b.trace)},
           {"trace_prime", number(b.trace_prime)}};
  if (b.fork_curvature) out["fork_curvature"] = number(*b.fork_curvature);
  Json diag{{"note", b.note},
            {"tolerances", Json{{"singular", b.tolerances.singular},
                                {"prime", b.tolerances.prime},
                                {"transcritical", b.tolerances.transcritical},
                                {"fork", b.tolerances.fork},
                                {"guard", b.tolerances.guard}}}};
  if (b.frame) {
    const auto& t = b.frame->tilde;
    diag["frame"] = chart_json(b.frame->s);
    Json tilde = Json::object();
    for (const char* key : {"Q_q", "Q_p", "P_q", "P_p", "Q_qq", "P_qq", "P_qp", "P_qqq", "P_qe"})
      tilde[key] = number(t[key]);
    diag["tilde"] = std::move(tilde);
  }
  out["diagnostics"] = std::move(diag);
  Json sens = Json::object();
  for (std::size_t i = 0; i < deformation_keys().size(); ++i)
    sens[deformation_keys()[i]] = number(b.deformation_sensitivities[i]);
  out["deformation_sensitivities"] = std::move(sens);
  return out;
}

Json verification_json(const Verification& v) {
  Json entries = Json::object();
  for (const auto& e : v.report.entries) {
    entries[e.key] = Json{{"group", to_string(e.group)},
                          {"analytic", number(e.analytic)},
                          {"numeric", number(e.numeric)},
                          {"estimate", number(e.fd_error)},
                          {"rel_error", number(e.rel_error)},
                          {"tolerance", e.tolerance},
                          {"status", to_string(e.verdict)}};
  }
  return Json{{"chart", chart_json(v.chart)},
              {"summary", Json{{"passed", v.report.passed},
                               {"failed", v.report.failed},
                               {"inconclusive", v.report.inconclusive}}},
              {"entries", std::move(entries)}};
}

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

Json analysis_json(const RunMeta& meta, const ProblemConfig& config, const Analysis& analysis,
                   const BifurcationReport& bifurcation, const Verification* verification) {
  const auto& z = analysis.z;
  Json out{{"meta", meta_json(meta, config)},
           {"problem", problem_json(config)},
           {"prerequisites", Json{{"y_max", analysis.orbit.y_max},
                                  {"period", analysis.orbit.period},
                                  {"energy", analysis.orbit.energy}}},
           {"derivatives", derivatives_json(analysis.derivatives)},
           {"z_tables", Json{{"z2", z_json(z.z2)},
                             {"z0", z_json(z.z0)},
                             {"turning_point", Json{{"V_y", z.v2},
                                                    {"V_xx", z.v11},
                                                    {"V_xxx", z.v111},
                                                    {"F", z.f}}}}},
           {"bifurcation", bifurcation_json(bifurcation)}};
  if (verification) out["verification"] = verification_json(*verification);
  return out;
}

Json sweep_json(const RunMeta& meta, const ProblemConfig& config, const SweepResult& result,
                const std::vector<CheckedRoot>& roots) {
  Json samples = Json::array();
  for (const auto& s : result.samples) {
    Json row{{"epsilon", s.eps}};
    if (s.error) {
      row["error"] = *s.error;
    } else {
      row["trace"] = number(s.trace);
      row["trace_prime"] = number(s.trace_prime);
    }
    samples.push_back(std::move(row));
  }
  Json rs = Json::array();
  for (const auto& r : roots) {
    Json row{{"epsilon", r.root.eps},
             {"trace", number(r.root.trace)},
             {"trace_prime", number(r.root.trace_prime)},
             {"iterations", r.root.iterations},
             {"converged", r.root.converged},
             {"recheck_trace", number(r.recheck_trace)},
             {"verified", r.verified}};
    if (r.classification) row["bifurcation"] = bifurcation_json(*r.classification);
    if (r.error) row["error"] = *r.error;
    rs.push_back(std::move(row));
  }
  return Json{{"meta", meta_json(meta, config)},
              {"problem", problem_json(config)},
              {"samples", std::move(samples)},
              {"roots", std::move(rs)}};
}

void write_analysis_csv(std::ostream& out, const Analysis& analysis,
                        const BifurcationReport& b, const Verification* verification) {
  if (verification) {
    out << "key,group,analytic,numeric,estimate,rel_error,tolerance,status\n";
    for (const auto& e : verification->report.entries)
      fmt::print(out, "{},{},{},{},{},{},{},{}\n", e.key, to_string(e.group), e.analytic,
                 e.numeric, e.fd_error, e.rel_error, e.tolerance, to_string(e.verdict));
    return;
  }
  out << "key,value\n";
  fmt::print(out, "y_max,{}\nperiod,{}\nenergy,{}\n", analysis.orbit.y_max, analysis.orbit.period,
             analysis.orbit.energy);
  for (std::size_t i = 0; i < kNumDerivatives; ++i)
    fmt::print(out, "{},{}\n", derivative_specs()[i].key, analysis.derivatives.values[i]);
  fmt::print(out, "trace,{}\ntrace_prime,{}\nverdict,{}\n", b.trace, b.trace_prime,
             to_string(b.verdict));
  if (b.fork_curvature) fmt::print(out, "fork_curvature,{}\n", *b.fork_curvature);
}

void write_analysis_text(std::ostream& out, const ProblemConfig& config, const Analysis& analysis,
                         const BifurcationReport& b, const Verification* verification) {
  fmt::print(out, "potential    {}\n", config.potential);
  fmt::print(out, "deformation  {}\n", config.deformation.empty() ? "(none)" : config.deformation);
  fmt::print(out, "E0           {}\nepsilon0     {}\n\n", config.energy0, *config.epsilon0);
  fmt::print(out, "y_max        {}\nperiod       {}\nenergy       {}\n\n", analysis.orbit.y_max,
             analysis.orbit.period, analysis.orbit.energy);
  if (verification) {
    fmt::print(out, "{:<7} {:>24} {:>24} {:>10} {:>10} {}\n", "key", "analytic", "numeric",
               "estimate", "rel", "status");
    for (const auto& e : verification->report.entries)
      fmt::print(out, "{:<7} {:>24} {:>24} {:>10.2e} {:>10.2e} {}\n", e.key, e.analytic, e.numeric,
                 e.fd_error, e.rel_error, to_string(e.verdict));
    fmt::print(out, "\npassed {}, failed {}, inconclusive {}\n\n", verification->report.passed,
               verification->report.failed, verification->report.inconclusive);
  } else {
    for (std::size_t i = 0; i < kNumDerivatives; ++i)
      fmt::print(out, "{:<7} {:>24}\n", derivative_specs()[i].key, analysis.derivatives.values[i]);
    out << '\n';
  }
  fmt::print(out, "verdict      {}\ntrace        {}\ntrace'       {}\n", to_string(b.verdict),
             b.trace, b.trace_prime);
  if (b.fork_curvature) fmt::print(out, "eps_B''      {}\n", *b.fork_curvature);
  if (!b.note.empty()) fmt::print(out, "note         {}\n", b.note);
}

void write_sweep_csv(std::ostream& out, const SweepResult& result,
                     const std::vector<CheckedRoot>& roots) {
  out << "epsilon,trace,trace_prime\n";
  for (const auto& s : result.samples) {
    if (s.error)
      fmt::print(out, "{},,\n", s.eps);
    else
      fmt::print(out, "{},{},{}\n", s.eps, s.trace, s.trace_prime);
  }
  out << "# roots\n# epsilon,trace,trace_prime,iterations,converged,verified,verdict,fork_curvature\n";
  for (const auto& r : roots) {
    std::string verdict, curvature;
    if (r.classification) {
      verdict = to_string(r.classification->verdict);
      if (r.classification->fork_curvature)
        curvature = format_number(*r.classification->fork_curvature);
    }
    fmt::print(out, "# {},{},{},{},{},{},{},{}\n", r.root.eps, r.root.trace, r.root.trace_prime,
               r.root.iterations, r.root.converged, r.verified, verdict, curvature);
  }
}

void write_sweep_text(std::ostream& out, const ProblemConfig& config, const SweepResult& result,
                      const std::vector<CheckedRoot>& roots) {
  fmt::print(out, "potential    {}\nE0           {}\n\n", config.potential, config.energy0);
  fmt::print(out, "{:>24} {:>24} {:>24}\n", "epsilon", "trace", "trace'");
  for (const auto& s : result.samples) {
    if (s.error)
      fmt::print(out, "{:>24} failed: {}\n", s.eps, *s.error);
    else
      fmt::print(out, "{:>24} {:>24} {:>24}\n", s.eps, s.trace, s.trace_prime);
  }
  fmt::print(out, "\n{} root(s)\n", roots.size());
  for (const auto& r : roots) {
    fmt::print(out, "eps = {}  trace = {}  trace' = {}  {}", r.root.eps, r.root.trace,
               r.root.trace_prime, r.verified ? "verified" : "NOT verified");
    if (r.classification) {
      fmt::print(out, "  {}", to_string(r.classification->verdict));
      if (r.classification->fork_curvature)
        fmt::print(out, "  eps_B'' = {}", *r.classification->fork_curvature);
    }
    if (r.error) fmt::print(out, "  ({})", *r.error);
    out << '\n';
  }
}

}  // namespace libration::cli
