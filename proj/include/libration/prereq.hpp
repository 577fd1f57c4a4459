#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "libration/variational.hpp"

namespace libration {

struct PrereqOptions {
  double rtol = 1e-11;  // adaptive pass
  double atol = 1e-12;
  std::size_t uniform_intervals = 4096;
  double scan_lo = -10.0;
  double scan_hi = 10.0;
  std::size_t scan_samples = 4001;
  std::optional<std::pair<double, double>> ymax_bracket;
  double max_time = 1e4;
  double invariant_tol = 1e-9;
};

/// Largest upward crossing of V(0, y) = energy, i.e. the right turning point
/// of a libration along the y-axis. Throws NumericalError when there is no
/// such root or when V_y vanishes there.
double solve_ymax(const SymbolicField& potential, double energy,
                  std::optional<std::pair<double, double>> bracket = std::nullopt,
                  double scan_lo = -10.0, double scan_hi = 10.0,
                  std::size_t scan_samples = 4001);

/// Orbit data along the libration and the two fundamental systems
///   xi''  + V_xx(0, y(t)) xi  = 0,   xi(0)  = (1, 0), (0, 1)
///   eta'' + V_yy(0, y(t)) eta = 0,   eta(0) = (1, 0), (0, 1)
/// as dense functions on the shared grid [0, T].
struct OrbitPrerequisites {
  double y_max = 0.0;
  double period = 0.0;
  double energy = 0.0;
  TimeGrid grid;
  TimeFunction y, ydot;
  TimeFunction xi1, xi1_dot, xi2, xi2_dot;
  TimeFunction eta1, eta1_dot, eta2, eta2_dot;
  bool has_fundamental_systems() const { return xi1.valid(); }
};

/// Period detection and shared grid construction: adaptive pass for the
/// return with y' crossing zero downward, then the grid nodes are fixed and
/// the period refined so the fixed-step integration returns y'(T) = 0.
OrbitPrerequisites integrate_orbit(const Model& model, double y_max, double energy,
                                   const PrereqOptions& options = {});

/// Fills the xi/eta parts of an orbit produced by integrate_orbit.
void fundamental_systems(const Model& model, OrbitPrerequisites& orbit);

/// solve_ymax + integrate_orbit + fundamental_systems + invariant check.
OrbitPrerequisites compute_prerequisites(const Model& model, double energy,
                                         const PrereqOptions& options = {});

/// The four homogeneous first-order systems (a^1, a^3 in the 13 block and
/// a^2, a^4 in the 24 block) with identity initial data.
std::vector<PairSystem> first_order_homogeneous_systems();

struct InvariantReport {
  double energy_drift = 0.0;
  double periodicity = 0.0;  // max(|y(T) - y_max|, |y'(T)|)
  double wronskian_xi = 0.0;
  double wronskian_eta = 0.0;
  bool passed(double tol) const {
    return energy_drift <= tol && periodicity <= tol && wronskian_xi <= tol &&
           wronskian_eta <= tol;
  }
};

InvariantReport check_invariants(const Model& model, const OrbitPrerequisites& orbit);

/// t, y, y', xi1, xi1', xi2, xi2', eta1, eta1', eta2, eta2' on the grid.
void write_prerequisites_csv(const OrbitPrerequisites& orbit, std::ostream& out);

}  // namespace libration
