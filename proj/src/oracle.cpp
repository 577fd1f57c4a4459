#include "libration/oracle.hpp"

#include <algorithm>
#include <boost/numeric/odeint/stepper/generation.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "libration/errors.hpp"

namespace libration {

namespace odeint = boost::numeric::odeint;

namespace {

const PartialIndex kX{Var::x};
const PartialIndex kY{Var::y};
const PartialIndex kPx{Var::px};
const PartialIndex kPy{Var::py};

double turning_point(const SymbolicField& v, double energy, double y, int iterations) {
  for (int it = 0; it < iterations; ++it) {
    const PhasePoint pt{0.0, y, 0.0, 0.0};
    const double f = v.value(pt) - energy;
    const double d = v.partial_value(kY, pt);
    if (d == 0.0) throw NumericalError("turning point search hit V_y = 0");
    const double dy = f / d;
    y -= dy;
    if (std::abs(dy) <= 1e-15 * std::max(1.0, std::abs(y))) return y;
  }
  throw NumericalError("turning point search did not converge near y = " + std::to_string(y));
}

}  // namespace

PoincareOracle::PoincareOracle(Model model, double energy0, double eps0, double y_hint,
                               OracleOptions options)
    : model_(std::move(model)), energy0_(energy0), eps0_(eps0), options_(options) {
  y_ref_ = turning_point(model_.potential, energy0_ + eps0_, y_hint, options_.newton_iterations);

  // Reference period from an adaptive pass; it only fixes the step size.
  using S = State4;
  auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<S>());
  auto sys = [this](const S& a, S& da, double) { da = rhs(a, 0.0); };
  stepper.initialize(S{0.0, y_ref_, 0.0, 0.0}, 0.0, 1e-3);
  double prev = 0.0;
  for (int n = 0; n < 1000000; ++n) {
    auto [t0, t1] = stepper.do_step(sys);
    const double py = stepper.current_state()[3];
    if (!std::isfinite(py) || std::abs(stepper.current_state()[1]) > 1e8)
      throw NumericalError("reference orbit escaped");
    if (prev > 0.0 && py <= 0.0) {
      double lo = t0, hi = t1;
      S mid;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
        const double m = 0.5 * (lo + hi);
        stepper.calc_state(m, mid);
        (mid[3] > 0.0 ? lo : hi) = m;
      }
      period_ = 0.5 * (lo + hi);
      break;
    }
    prev = py;
  }
  if (period_ <= 0.0) throw NumericalError("reference orbit did not return to the section");
  h_ = period_ / static_cast<double>(options_.steps_per_period);
}

State4 PoincareOracle::rhs(const State4& a, double delta) const {
  const PhasePoint pt{a[0], a[1], a[2], a[3]};
  State4 d{a[2], a[3], -model_.potential.partial_value(kX, pt),
           -model_.potential.partial_value(kY, pt)};
  if (delta != 0.0 && model_.deformation) {
    const SymbolicField& f = *model_.deformation;
    d[0] += delta * f.partial_value(kPx, pt);
    d[1] += delta * f.partial_value(kPy, pt);
    d[2] -= delta * f.partial_value(kX, pt);
    d[3] -= delta * f.partial_value(kY, pt);
  }
  return d;
}

State4 PoincareOracle::rk_step(const State4& a, double delta, double h) const {
  odeint::runge_kutta_fehlberg78<State4> stepper;
  auto sys = [this, delta](const State4& x, State4& dx, double) { dx = rhs(x, delta); };
  State4 out;
  stepper.do_step(sys, a, 0.0, out, h);
  return out;
}

double PoincareOracle::y_max(double eps) const {
  return turning_point(model_.potential, energy0_ + eps, y_ref_, options_.newton_iterations);
}

double PoincareOracle::start_y(double q, double p, double eps, double delta) const {
  const double target = energy0_ + eps;
  auto phi = [&](double y, double& dphi) {
    const PhasePoint pt{q, y, p, 0.0};
    double f = 0.5 * p * p + model_.potential.value(pt) - target;
    dphi = model_.potential.partial_value(kY, pt);
    if (delta != 0.0 && model_.deformation) {
      f += delta * model_.deformation->value(pt);
      dphi += delta * model_.deformation->partial_value(kY, pt);
    }
    return f;
  };
  double y = y_max(eps);
  double d = 0.0;
  double f = phi(y, d);
  for (int it = 0; it < options_.newton_iterations; ++it) {
    if (f == 0.0) return y;
    if (d == 0.0) throw NumericalError("start point search hit a flat energy surface");
    double step = f / d;
    double y_new = y - step, d_new = 0.0;
    double f_new = phi(y_new, d_new);
    for (int k = 0; k < 30 && std::abs(f_new) > std::abs(f); ++k) {
      step *= 0.5;
      y_new = y - step;
      f_new = phi(y_new, d_new);
    }
    y = y_new;
    f = f_new;
    d = d_new;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(y))) return y;
  }
  throw NumericalError("start point search did not converge");
}

SectionHit PoincareOracle::map(double q, double p, double eps, double delta) const {
  State4 a{q, start_y(q, p, eps, delta), p, 0.0};
  const double dead = options_.dead_band * period_;
  const auto max_steps =
      static_cast<std::size_t>(std::ceil(options_.max_periods * options_.steps_per_period));
  double t = 0.0;
  for (std::size_t n = 0; n < max_steps; ++n) {
    const State4 b = rk_step(a, delta, h_);
    if (!std::isfinite(b[3])) throw NumericalError("orbit left the finite range");
    if (t + h_ > dead && a[3] > 0.0 && b[3] <= 0.0) {
      // Newton on the length of the last step, slope from the vector field.
      double s = h_ * a[3] / (a[3] - b[3]);
      State4 c = rk_step(a, delta, s);
      for (int it = 0; it < options_.newton_iterations; ++it) {
        const double slope = rhs(c, delta)[3];
        if (slope == 0.0) throw NumericalError("tangent section crossing");
        const double ds = c[3] / slope;
        s -= ds;
        c = rk_step(a, delta, s);
        if (std::abs(ds) <= 1e-15 * h_ || c[3] == 0.0) {
          return {c[0], c[2], t + s, c, rhs(c, delta)[3]};
        }
      }
      throw NumericalError("section crossing refinement did not converge");
    }
    a = b;
    t += h_;
  }
  throw NumericalError("no return to the section within " +
                       std::to_string(options_.max_periods) + " periods");
}

State4 PoincareOracle::flow(const State4& a, double delta, double t) const {
  const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(t / h_ - 1e-9)));
  const double h = t / static_cast<double>(n);
  State4 x = a;
  for (std::size_t k = 0; k < n; ++k) x = rk_step(x, delta, h);
  return x;
}

// ---------------------------------------------------------------------------

std::array<FdValue, kNumDerivatives> fd_derivatives(const PoincareOracle& oracle,
                                                    const Chart& chart) {
  const auto& s = chart.s;
  const double det = s[0] * s[3] - s[1] * s[2];
  if (std::abs(det - 1.0) > 1e-12) throw std::invalid_argument("chart is not symplectic");

  const double hqp = oracle.options().h_qp * std::max(1.0, std::abs(oracle.reference_y_max()));
  const std::array<double, 4> h{hqp, hqp, oracle.options().h_eps, oracle.options().h_delta};
  std::map<std::array<double, 4>, std::array<double, 2>> cache;

  auto image = [&](const std::array<double, 4>& u) {
    auto it = cache.find(u);
    if (it != cache.end()) return it->second;
    const double q = s[0] * u[0] + s[1] * u[1];
    const double p = s[2] * u[0] + s[3] * u[1];
    const SectionHit hit = oracle.map(q, p, oracle.eps0() + u[2], u[3]);
    // S^{-1} = [[s3, -s1], [-s2, s0]] for det 1.
    const std::array<double, 2> v{s[3] * hit.q - s[1] * hit.p, -s[2] * hit.q + s[0] * hit.p};
    cache.emplace(u, v);
    return v;
  };

  std::array<FdValue, kNumDerivatives> out;
  const auto& specs = derivative_specs();
  for (std::size_t i = 0; i < kNumDerivatives; ++i) {
    const auto& sp = specs[i];
    const std::size_t comp = sp.component == 1 ? 0 : 1;
    std::array<int, 4> counts{};
    for (std::size_t a = 0; a < 4; ++a) counts[a] = sp.counts[a];
    out[i] = mixed_difference<4>([&](const std::array<double, 4>& u) { return image(u)[comp]; },
                                 counts, h, oracle.options().richardson_levels);
  }
  return out;
}

FdValue flow_derivative_fd(const PoincareOracle& oracle, int r, const MultiIndex& idx, double t) {
  if (r < 1 || r > 4) throw std::invalid_argument("flow component outside 1..4");
  std::array<int, 5> counts{};
  for (int k = 0; k < idx.order(); ++k) {
    const int a = idx[k];
    if (a < 1 || a > 5) throw std::invalid_argument("flow argument outside 1..5");
    ++counts[static_cast<std::size_t>(a - 1)];
  }
  const double ha = oracle.options().h_qp * std::max(1.0, std::abs(oracle.reference_y_max()));
  const std::array<double, 5> h{ha, ha, ha, ha, oracle.options().h_delta};
  const State4 base{0.0, oracle.reference_y_max(), 0.0, 0.0};
  return mixed_difference<5>(
      [&](const std::array<double, 5>& u) {
        const State4 a{base[0] + u[0], base[1] + u[1], base[2] + u[2], base[3] + u[3]};
        return oracle.flow(a, u[4], t)[static_cast<std::size_t>(r - 1)];
      },
      counts, h, oracle.options().richardson_levels);
}

// ---------------------------------------------------------------------------

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

double group_tolerance(DerivativeGroup g, const CompareOptions& o) {
  switch (g) {
    case DerivativeGroup::first: return o.tol_first;
    case DerivativeGroup::second:
    case DerivativeGroup::eps_second:
    case DerivativeGroup::delta_second: return o.tol_second;
    default: return o.tol_third;
  }
}

CompareReport compare(const PoincareDerivatives& analytic,
                      const std::array<FdValue, kNumDerivatives>& numeric,
                      const CompareOptions& options) {
  CompareReport rep;
  const auto& specs = derivative_specs();
  for (std::size_t i = 0; i < kNumDerivatives; ++i) {
    CompareEntry e;
    e.key = specs[i].key;
    e.group = specs[i].group;
    e.analytic = analytic.values[i];
    e.numeric = numeric[i].value;
    const double denom = std::max(std::abs(e.numeric), options.floor);
    e.fd_error = numeric[i].error / denom;
    e.rel_error = std::abs(e.analytic - e.numeric) / denom;
    e.tolerance = group_tolerance(e.group, options);
    if (!std::isfinite(e.rel_error) || e.rel_error > e.tolerance)
      e.verdict = e.fd_error > e.tolerance ? Verdict::inconclusive : Verdict::fail;
    else
      e.verdict = e.fd_error > e.tolerance ? Verdict::inconclusive : Verdict::pass;
    switch (e.verdict) {
      case Verdict::pass: ++rep.passed; break;
      case Verdict::fail: ++rep.failed; break;
      case Verdict::inconclusive: ++rep.inconclusive; break;
    }
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace libration
