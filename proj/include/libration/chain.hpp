#pragma once

#include <map>

#include "libration/derivatives.hpp"
#include "libration/flowderiv.hpp"

namespace libration {

/// Derivatives of the starting point y0(u) (Z2) and the return time T(u) (Z0)
/// with respect to u = (q, p, eps, delta), indices 1..4, at (0, 0, eps0, 0).
/// The remaining components are fixed: a^1 = q, a^3 = p, a^4 = 0, a^5 = delta.
struct ZTables {
  std::map<MultiIndex, double> z2;
  std::map<MultiIndex, double> z0;
  // Orbit data at the turning point (0, y_max).
  double v2 = 0.0, v11 = 0.0, v111 = 0.0;
  double f = 0.0;  // F(0, y_max, 0, 0)

  /// Z^lambda_l for lambda in 0..5; missing Z2/Z0 entries throw.
  double operator()(int lambda, const MultiIndex& l) const;
};

/// The closed-form orders 1 and 2 entries, built from the flow entries at T.
ZTables explicit_z_tables(const FlowTables& tables, const Model& model, double y_max);

/// Every entry up to order 3 (at most one delta) from the implicit-function
/// rule for y0 and the return condition x^4(T(u), a(u)) = 0, expanded over
/// set partitions. Needs the time-index entries of the tables.
ZTables generic_z_tables(const FlowTables& tables, const Model& model, double y_max);

/// The 38 derivatives from the row listings, with the literal variants
/// selected by options.third_order and options.delta_third.
PoincareDerivatives assemble(const FlowTables& tables, const ZTables& z,
                             const FormulaOptions& options = {});

/// The 38 derivatives from the full chain rule, every lambda summed,
/// including the terms that are structurally zero.
PoincareDerivatives assemble_generic(const FlowTables& tables, const ZTables& z);

/// d^|l| x^r(T(u), a(u)) / du^l by the chain rule (any l up to order 3).
double chain_derivative(const FlowTables& tables, const ZTables& z, int r, const MultiIndex& l);

}  // namespace libration
