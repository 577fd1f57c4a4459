#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "libration/bifurcate.hpp"
#include "libration/oracle.hpp"
#include "libration/pipeline.hpp"

namespace libration::cli {

using Json = nlohmann::ordered_json;

struct RunMeta {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

struct Verification {
  Chart chart;  // both sides are taken in this chart
  CompareReport report;
};

struct CheckedRoot {
  SweepRoot root;
  double recheck_trace = 0.0;
  bool verified = false;  // |recheck_trace - 2| within the root tolerance
  std::optional<BifurcationReport> classification;
  std::optional<std::string> error;  // re-check or classification failed
};

/// Shortest representation that reads back to the same double.
std::string format_number(double v);

Json analysis_json(const RunMeta& meta, const ProblemConfig& config, const Analysis& analysis,
                   const BifurcationReport& bifurcation, const Verification* verification);

Json sweep_json(const RunMeta& meta, const ProblemConfig& config, const SweepResult& result,
                const std::vector<CheckedRoot>& roots);

void write_analysis_csv(std::ostream& out, const Analysis& analysis,
                        const BifurcationReport& bifurcation, const Verification* verification);
void write_analysis_text(std::ostream& out, const ProblemConfig& config, const Analysis& analysis,
                         const BifurcationReport& bifurcation, const Verification* verification);

void write_sweep_csv(std::ostream& out, const SweepResult& result,
                     const std::vector<CheckedRoot>& roots);
void write_sweep_text(std::ostream& out, const ProblemConfig& config, const SweepResult& result,
                      const std::vector<CheckedRoot>& roots);

}  // namespace libration::cli
