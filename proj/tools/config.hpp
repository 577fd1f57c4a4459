#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "libration/bifurcate.hpp"
#include "libration/flowderiv.hpp"
#include "libration/oracle.hpp"
#include "libration/prereq.hpp"

namespace libration::cli {

struct SweepRange {
  double lo = 0.0;
  double hi = 0.0;
  int samples = 0;
};

enum class OutputFormat { json, csv, text };

const char* to_string(OutputFormat f);
OutputFormat parse_format(const std::string& text);  // throws ConfigError

/// One problem definition: INI sections [problem], [formulas], [tolerances]
/// and [output]. Exactly one of epsilon0 and the sweep range is set.
struct ProblemConfig {
  std::string potential;
  std::string deformation;  // empty: none
  double energy0 = 0.0;
  std::optional<double> epsilon0;
  std::optional<SweepRange> sweep;
  bool classify_roots = false;

  FormulaOptions formulas;
  PrereqOptions prereq;
  OracleOptions oracle;
  CompareOptions compare;
  BifurcationTolerances classify;
  SweepOptions sweep_options;

  OutputFormat format = OutputFormat::json;
  std::string out_path;  // empty or "-": stdout
};

/// Every key accepted in [tolerances] and by --tol-override.
const std::vector<std::string>& tolerance_keys();

/// Current value of a tolerance key (integers are returned as doubles).
double tolerance_value(const ProblemConfig& config, const std::string& key);

/// Sets one tolerance. Values must be positive; count-like keys must be
/// integers. Throws ConfigError.
void set_tolerance(ProblemConfig& config, const std::string& key, const std::string& value);

/// "key=value" from the command line.
void apply_override(ProblemConfig& config, const std::string& assignment);

ProblemConfig parse_config(const std::string& ini_text);
ProblemConfig load_config(const std::string& path);

/// Checks the cross-field invariants; throws ConfigError.
void validate(const ProblemConfig& config);

}  // namespace libration::cli
