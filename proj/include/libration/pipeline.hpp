#pragma once

#include "libration/chain.hpp"

namespace libration {

/// Everything computed for one (model, E0, eps0): prerequisites, flow tables
/// at third order (with time-index entries), Z tables and the 38 numbers.
struct Analysis {
  OrbitPrerequisites orbit;
  FlowTables tables;
  ZTables z;
  PoincareDerivatives derivatives;
};

/// Throws HypothesisError unless the plane x = px = 0 is invariant over the
/// y range of the orbit (with margins) and a band of py values.
void require_hypotheses(const Model& model, const OrbitPrerequisites& orbit);

/// Hypotheses are checked after the orbit is known; a failure throws
/// HypothesisError.
Analysis analyze(const Model& model, double energy0, double eps0,
                 const FormulaOptions& formulas = {}, const PrereqOptions& prereq = {});

/// Only Q_q, Q_p, P_q, P_p and Q_qe + P_pe: first-order tables plus the two
/// second-order entries x^1_12 and x^3_32.
struct TraceData {
  double y_max = 0.0, period = 0.0;
  std::array<double, 4> jacobian{};  // Q_q, Q_p, P_q, P_p
  double trace = 0.0, trace_prime = 0.0;
};

TraceData trace_only(const Model& model, double energy, const PrereqOptions& prereq = {});

}  // namespace libration
