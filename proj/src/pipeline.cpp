#include "libration/pipeline.hpp"

#include <algorithm>
#include <array>

#include "libration/errors.hpp"

namespace libration {

void require_hypotheses(const Model& model, const OrbitPrerequisites& orbit) {
  double lo = orbit.y_max, hi = orbit.y_max;
  for (std::size_t i = 0; i < orbit.grid.size(); ++i) {
    lo = std::min(lo, orbit.y.node_value(i));
    hi = std::max(hi, orbit.y.node_value(i));
  }
  const auto ys = default_probe_ys(lo, hi);
  const double v = std::max(1.0, std::abs(hi - lo));
  const std::array<double, 5> pys{-v, -0.5 * v, 0.0, 0.5 * v, v};
  const auto* f = model.deformation ? &*model.deformation : nullptr;
  const auto rep = check_hypotheses(model.potential, f, ys, pys);
  if (!rep.passed) throw HypothesisError(rep.message);
}

Analysis analyze(const Model& model, double energy0, double eps0, const FormulaOptions& formulas,
                 const PrereqOptions& prereq) {
  OrbitPrerequisites orbit = compute_prerequisites(model, energy0 + eps0, prereq);
  require_hypotheses(model, orbit);
  FlowTables tables = third_order_tables(model, orbit, formulas);
  add_time_index_entries(tables, model, orbit);
  ZTables z = explicit_z_tables(tables, model, orbit.y_max);
  PoincareDerivatives d = assemble(tables, z, formulas);
  d.epsilon0 = eps0;
  d.energy = energy0 + eps0;
  d.period = orbit.period;
  d.y_max = orbit.y_max;
  return {std::move(orbit), std::move(tables), std::move(z), d};
}

TraceData trace_only(const Model& model, double energy, const PrereqOptions& prereq) {
  const double y_max = solve_ymax(model.potential, energy, std::nullopt, prereq.scan_lo,
                                  prereq.scan_hi, prereq.scan_samples);
  OrbitPrerequisites orbit = integrate_orbit(model, y_max, energy, prereq);
  require_hypotheses(model, orbit);
  const Model plain{model.potential, std::nullopt};
  const std::vector<EntryKey> keys{{1, MultiIndex{1}}, {3, MultiIndex{1}}, {1, MultiIndex{3}},
                                   {3, MultiIndex{3}}, {4, MultiIndex{2}}, {1, MultiIndex{1, 2}},
                                   {3, MultiIndex{2, 3}}};
  FlowTables t = build_flow_tables(plain, orbit, keys);
  TraceData out;
  out.y_max = orbit.y_max;
  out.period = orbit.period;
  out.jacobian = {t.at_end(1, MultiIndex{1}), t.at_end(1, MultiIndex{3}),
                  t.at_end(3, MultiIndex{1}), t.at_end(3, MultiIndex{3})};
  const PhasePoint p{0.0, orbit.y_max, 0.0, 0.0};
  const double v2 = model.potential.partial_value(PartialIndex{Var::y}, p);
  const double v11 = model.potential.partial_value(PartialIndex{Var::x, Var::x}, p);
  const double x42 = t.at_end(4, MultiIndex{2});
  const double z23 = 1.0 / v2, z03 = x42 / (v2 * v2);
  const double qe = t.at_end(1, MultiIndex{1, 2}) * z23 + t.at_end(3, MultiIndex{1}) * z03;
  const double pe = t.at_end(3, MultiIndex{2, 3}) * z23 - v11 * t.at_end(1, MultiIndex{3}) * z03;
  out.trace = out.jacobian[0] + out.jacobian[3];
  out.trace_prime = qe + pe;
  return out;
}

}  // namespace libration
