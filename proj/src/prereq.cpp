#include "libration/prereq.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <ostream>
#include <sstream>

#include "libration/errors.hpp"

namespace libration {

namespace {

namespace odeint = boost::numeric::odeint;
using Orbit2 = std::array<double, 2>;

double refine_root(const std::function<double(double)>& f, double a, double b, double fa,
                   double fb) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb,
                                             boost::math::tools::eps_tolerance<double>(52), iters);
  double m = 0.5 * (r.first + r.second);
  // pick whichever end/midpoint has the smallest residual
  double best = m, fbest = std::abs(f(m));
  for (double c : {r.first, r.second}) {
    double fc = std::abs(f(c));
    if (fc < fbest) {
      best = c;
      fbest = fc;
    }
  }
  return best;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// First downward zero crossing of y' after the dead-band, located with the
// dense output of an adaptive Dormand-Prince pass. Step endpoints are
// reported through `knots`.
double detect_return(const Model& model, double y_max, double rtol, double atol, double dead_band,
                     double max_time, std::vector<double>* knots) {
  const auto& v2 = model.potential.compiled({Var::y});
  auto sys = [&v2](const Orbit2& s, Orbit2& ds, double) {
    ds[0] = s[1];
    ds[1] = -v2({0.0, s[0], 0.0, 0.0});
  };
  auto stepper = odeint::make_dense_output(atol, rtol, odeint::runge_kutta_dopri5<Orbit2>());
  double scale = std::max(1.0, std::abs(y_max));
  stepper.initialize(Orbit2{y_max, 0.0}, 0.0, 1e-3);
  Orbit2 prev = stepper.current_state();
  double t_prev = 0.0;
  while (true) {
    auto [t0, t1] = stepper.do_step(sys);
    (void)t0;
    Orbit2 cur = stepper.current_state();
    if (!std::isfinite(cur[0]) || !std::isfinite(cur[1]) || std::abs(cur[0]) > 1e8 * scale)
      throw NumericalError("orbit left the bounded region; no libration at this energy");
    if (knots) knots->push_back(t1);
    if (t1 > dead_band && prev[1] > 0.0 && cur[1] <= 0.0) {
      double lo = std::max(t_prev, dead_band);
      Orbit2 s;
      auto f = [&](double t) {
        stepper.calc_state(t, s);
        return s[1];
      };
      double flo = f(lo);
      if (flo <= 0.0) lo = t_prev, flo = f(lo);
      return refine_root(f, lo, t1, flo, cur[1]);
    }
    if (t1 > max_time)
      throw NumericalError("no return to the section within t = " + fmt(max_time) +
                           "; not a libration at this energy");
    prev = cur;
    t_prev = t1;
  }
}

TimeGrid scaled_grid(const std::vector<double>& fractions, double T) {
  std::vector<double> nodes(fractions.size());
  for (std::size_t i = 0; i < fractions.size(); ++i) nodes[i] = fractions[i] * T;
  nodes.back() = T;
  return TimeGrid(std::move(nodes));
}

}  // namespace

double solve_ymax(const SymbolicField& potential, double energy,
                  std::optional<std::pair<double, double>> bracket, double scan_lo,
                  double scan_hi, std::size_t scan_samples) {
  const auto& v = potential.compiled({});
  auto f = [&](double y) { return v({0.0, y, 0.0, 0.0}) - energy; };
  double lo = scan_lo, hi = scan_hi;
  if (bracket) std::tie(lo, hi) = *bracket;
  if (!(hi > lo)) throw NumericalError("empty search range for the turning point");
  std::size_t n = std::max<std::size_t>(scan_samples, 2);
  if (bracket) n = std::max<std::size_t>(n, 257);

  // Scan from the top down for the largest upward crossing.
  double y_right = hi;
  double f_right = f(hi);
  std::optional<double> root;
  for (std::size_t k = n - 1; k-- > 0;) {
    double y_left = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    double f_left = f(y_left);
    if (std::isfinite(f_left) && std::isfinite(f_right) && f_left < 0.0 && f_right >= 0.0) {
      root = refine_root(f, y_left, y_right, f_left, f_right);
      break;
    }
    y_right = y_left;
    f_right = f_left;
  }
  if (!root)
    throw NumericalError("V(0, y) = " + fmt(energy) + " has no upward crossing in [" + fmt(lo) +
                         ", " + fmt(hi) + "]");
  double y = *root;
  if (std::abs(f(y)) > 1e-12 * (1.0 + std::abs(energy)))
    throw NumericalError("turning point refinement did not converge at y = " + fmt(y));
  double v2 = potential.partial_value({Var::y}, {0.0, y, 0.0, 0.0});
  if (!(v2 > 1e-8 * (1.0 + std::abs(energy))))
    throw NumericalError("degenerate turning point: V_y(0, y_max) = " + fmt(v2) +
                         " at y_max = " + fmt(y));
  return y;
}

std::vector<PairSystem> first_order_homogeneous_systems() {
  std::vector<PairSystem> out;
  out.push_back({Pair::p13, MultiIndex{1}, {}, {}, 1.0, 0.0});
  out.push_back({Pair::p13, MultiIndex{3}, {}, {}, 0.0, 1.0});
  out.push_back({Pair::p24, MultiIndex{2}, {}, {}, 1.0, 0.0});
  out.push_back({Pair::p24, MultiIndex{4}, {}, {}, 0.0, 1.0});
  return out;
}

OrbitPrerequisites integrate_orbit(const Model& model, double y_max, double energy,
                                   const PrereqOptions& options) {
  // Coarse pass for the dead-band, then the accurate pass.
  double t_est = detect_return(model, y_max, 1e-7, 1e-9, 0.0, options.max_time, nullptr);
  std::vector<double> knots;
  double T = detect_return(model, y_max, options.rtol, options.atol, t_est / 100.0,
                           options.max_time, &knots);

  // Uniform nodes plus the adaptive step endpoints, kept as fractions of T.
  const std::size_t n = std::max<std::size_t>(options.uniform_intervals, 16);
  std::vector<double> fr(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fr[i] = static_cast<double>(i) / static_cast<double>(n);
  const double min_gap = 0.1 / static_cast<double>(n);
  for (double k : knots) {
    double f = k / T;
    if (f <= 0.0 || f >= 1.0) continue;
    double nearest = std::round(f * static_cast<double>(n)) / static_cast<double>(n);
    if (std::abs(f - nearest) > min_gap) fr.push_back(f);
  }
  std::sort(fr.begin(), fr.end());
  fr.erase(std::unique(fr.begin(), fr.end(), [&](double a, double b) { return b - a < min_gap; }),
           fr.end());
  fr.back() = 1.0;

  // Newton on T so that the fixed-grid integration ends with y'(T) = 0.
  const auto& v2 = model.potential.compiled({Var::y});
  for (int it = 0; it < 8; ++it) {
    auto end = orbit_end_state(model, y_max, scaled_grid(fr, T));
    double acc = v2({0.0, end[0], 0.0, 0.0});
    double dT = end[1] / acc;
    T += dT;
    if (std::abs(dT) <= 1e-15 * T) break;
  }

  OrbitPrerequisites out;
  out.y_max = y_max;
  out.period = T;
  out.energy = energy;
  out.grid = scaled_grid(fr, T);
  VariationalPlan plan(model);
  GridSolution sol = integrate_on_grid(plan, y_max, out.grid);
  out.y = sol.function(0);
  out.ydot = sol.function(1);
  return out;
}

void fundamental_systems(const Model& model, OrbitPrerequisites& orbit) {
  VariationalPlan plan(model);
  for (auto& s : first_order_homogeneous_systems()) plan.add(std::move(s));
  GridSolution sol = integrate_on_grid(plan, orbit.y_max, orbit.grid);
  orbit.y = sol.function(0);
  orbit.ydot = sol.function(1);
  orbit.xi1 = sol.function(2);
  orbit.xi1_dot = sol.function(3);
  orbit.xi2 = sol.function(4);
  orbit.xi2_dot = sol.function(5);
  orbit.eta1 = sol.function(6);
  orbit.eta1_dot = sol.function(7);
  orbit.eta2 = sol.function(8);
  orbit.eta2_dot = sol.function(9);
}

OrbitPrerequisites compute_prerequisites(const Model& model, double energy,
                                         const PrereqOptions& options) {
  double y_max = solve_ymax(model.potential, energy, options.ymax_bracket, options.scan_lo,
                            options.scan_hi, options.scan_samples);
  OrbitPrerequisites orbit = integrate_orbit(model, y_max, energy, options);
  fundamental_systems(model, orbit);
  InvariantReport rep = check_invariants(model, orbit);
  if (!rep.passed(options.invariant_tol)) {
    std::ostringstream os;
    os.precision(3);
    os << "orbit invariants violated (energy drift " << rep.energy_drift << ", periodicity "
       << rep.periodicity << ", Wronskians " << rep.wronskian_xi << ", " << rep.wronskian_eta
       << ")";
    throw NumericalError(os.str());
  }
  return orbit;
}

InvariantReport check_invariants(const Model& model, const OrbitPrerequisites& o) {
  InvariantReport r;
  const auto& v = model.potential.compiled({});
  const std::size_t n = o.grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    double y = o.y.node_value(i), yd = o.ydot.node_value(i);
    double e = 0.5 * yd * yd + v({0.0, y, 0.0, 0.0});
    r.energy_drift = std::max(r.energy_drift, std::abs(e - o.energy));
    if (o.has_fundamental_systems()) {
      double wx = o.xi1.node_value(i) * o.xi2_dot.node_value(i) -
                  o.xi2.node_value(i) * o.xi1_dot.node_value(i);
      double we = o.eta1.node_value(i) * o.eta2_dot.node_value(i) -
                  o.eta2.node_value(i) * o.eta1_dot.node_value(i);
      r.wronskian_xi = std::max(r.wronskian_xi, std::abs(wx - 1.0));
      r.wronskian_eta = std::max(r.wronskian_eta, std::abs(we - 1.0));
    }
  }
  r.periodicity = std::max(std::abs(o.y.at_end() - o.y_max), std::abs(o.ydot.at_end()));
  return r;
}

void write_prerequisites_csv(const OrbitPrerequisites& o, std::ostream& out) {
  out << "t,y,ydot,xi1,xi1dot,xi2,xi2dot,eta1,eta1dot,eta2,eta2dot\n";
  out.precision(17);
  const bool fs = o.has_fundamental_systems();
  for (std::size_t i = 0; i < o.grid.size(); ++i) {
    out << o.grid[i] << ',' << o.y.node_value(i) << ',' << o.ydot.node_value(i);
    for (const TimeFunction* f : {&o.xi1, &o.xi1_dot, &o.xi2, &o.xi2_dot, &o.eta1, &o.eta1_dot,
                                  &o.eta2, &o.eta2_dot}) {
      out << ',';
      if (fs) out << f->node_value(i);
    }
    out << '\n';
  }
}

}  // namespace libration
