#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "libration/errors.hpp"
#include "libration/prereq.hpp"

using namespace libration;
using std::numbers::pi;

namespace {

Model model(const char* v) { return Model{SymbolicField::parse(v, FieldKind::potential), {}}; }

}  // namespace

TEST(SolveYmax, Harmonic) {
  auto m = model("0.5*(x^2+y^2)");
  EXPECT_NEAR(solve_ymax(m.potential, 0.5), 1.0, 1e-12);
  EXPECT_NEAR(solve_ymax(m.potential, 2.0), 2.0, 1e-12);
}

TEST(SolveYmax, CubicWellMatchesDenseScan) {
  auto m = model("0.5*y^2 - y^3/3");
  double y = solve_ymax(m.potential, 0.1, std::pair{0.0, 1.0});
  // independent oracle: dense scan for the sign change, then bisection
  auto f = [](double s) { return 0.5 * s * s - s * s * s / 3 - 0.1; };
  double lo = 0, hi = 1;
  for (int k = 0; k < 100000; ++k) {
    double a = k * 1e-5, b = (k + 1) * 1e-5;
    if (f(a) < 0 && f(b) >= 0) {
      lo = a;
      hi = b;
    }
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  EXPECT_NEAR(y, 0.5 * (lo + hi), 1e-12);
  // the automatic scan skips the downward crossing beyond the barrier
  EXPECT_NEAR(solve_ymax(m.potential, 0.1), y, 1e-12);
}

TEST(SolveYmax, Errors) {
  auto m = model("0.5*(x^2+y^2)");
  EXPECT_THROW(solve_ymax(m.potential, -1.0), NumericalError);
  auto flat = model("(y-1)^3 + 0.5*x^2");
  EXPECT_THROW(solve_ymax(flat.potential, 0.0), NumericalError);
}

TEST(Orbit, HarmonicClosedForm) {
  for (double amp : {1.0, 2.0}) {
    auto m = model("0.5*(x^2+y^2)");
    auto o = compute_prerequisites(m, 0.5 * amp * amp);
    EXPECT_NEAR(o.y_max, amp, 1e-12);
    EXPECT_NEAR(o.period, 2 * pi, 1e-9);
    for (double t : {0.0, 0.3, 1.7, 3.1, 5.9, o.period}) {
      EXPECT_NEAR(o.y(t), amp * std::cos(t), 1e-9);
      EXPECT_NEAR(o.ydot(t), -amp * std::sin(t), 1e-9);
      EXPECT_NEAR(o.eta1(t), std::cos(t), 1e-9);
      EXPECT_NEAR(o.eta2(t), std::sin(t), 1e-9);
    }
  }
}

TEST(Orbit, IsochronousHarmonicPeriod) {
  auto m = model("0.5*(x^2+y^2)");
  for (double e : {0.1, 0.5, 2.0}) EXPECT_NEAR(compute_prerequisites(m, e).period, 2 * pi, 1e-9);
}

TEST(Orbit, XiClosedForm) {
  double w = 1.7;
  auto m = model("0.5*(2.89*x^2+y^2)");
  auto o = compute_prerequisites(m, 0.5);
  for (double t : {0.1, 1.0, 2.5, 4.0, o.period}) {
    EXPECT_NEAR(o.xi1(t), std::cos(w * t), 1e-9);
    EXPECT_NEAR(o.xi2(t), std::sin(w * t) / w, 1e-9);
    EXPECT_NEAR(o.xi1_dot(t), -w * std::sin(w * t), 1e-9);
  }
}

TEST(Orbit, QuarticPeriodMatchesPeriodIntegral) {
  auto m = model("0.5*y^2 + y^4/4 + 0.5*x^2");
  auto o = compute_prerequisites(m, 0.75);
  EXPECT_NEAR(o.y_max, 1.0, 1e-12);
  // T = 4 * int_0^1 dy / sqrt(2 (E - V)); with y = sin(theta) the
  // integrand is regular: 4 * int_0^{pi/2} d theta / sqrt((3 + sin^2 theta) / 2)
  auto integrand = [](double th) {
    double s = std::sin(th);
    return 1.0 / std::sqrt((3.0 + s * s) / 2.0);
  };
  double T = 4 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0,
                                                                               pi / 2, 15, 1e-15);
  EXPECT_NEAR(o.period, T, 1e-9);
}

TEST(Orbit, InvariantsOnAsymmetricWell) {
  auto m = model("0.5*y^2 + 0.2*y^3 + (0.8 + 0.3*y)*x^2 + 0.1*x^3*y");
  auto o = compute_prerequisites(m, 0.1);
  auto r = check_invariants(m, o);
  EXPECT_LE(r.energy_drift, 1e-9);
  EXPECT_LE(r.periodicity, 1e-9);
  EXPECT_LE(r.wronskian_xi, 1e-9);
  EXPECT_LE(r.wronskian_eta, 1e-9);
  EXPECT_EQ(o.grid.front(), 0.0);
  EXPECT_EQ(o.grid.back(), o.period);
  EXPECT_GE(o.grid.size(), 4097u);
  EXPECT_EQ(o.xi1(0.0), 1.0);
  EXPECT_EQ(o.xi1_dot(0.0), 0.0);
  EXPECT_EQ(o.xi2(0.0), 0.0);
  EXPECT_EQ(o.xi2_dot(0.0), 1.0);
  EXPECT_EQ(o.eta1(0.0), 1.0);
  EXPECT_EQ(o.eta2_dot(0.0), 1.0);
}

TEST(Orbit, EtaMatchesPerturbedOrbits) {
  // (eta1, eta1') is the derivative of (y, y') with respect to y(0)
  auto m = model("0.5*y^2 + 0.2*y^3 + 0.5*x^2");
  auto o = compute_prerequisites(m, 0.1);
  double h = 1e-5;
  auto plus = integrate_orbit(m, o.y_max + h, 0.0);
  auto minus = integrate_orbit(m, o.y_max - h, 0.0);
  for (double frac : {0.25, 0.5, 0.8}) {
    double t = frac * o.period;
    double d = (plus.y(t) - minus.y(t)) / (2 * h);
    double dd = (plus.ydot(t) - minus.ydot(t)) / (2 * h);
    EXPECT_NEAR(o.eta1(t), d, 1e-5 * std::max(1.0, std::abs(d)));
    EXPECT_NEAR(o.eta1_dot(t), dd, 1e-5 * std::max(1.0, std::abs(dd)));
  }
}

TEST(Orbit, NoReturnIsReported) {
  // energy above the barrier of the cubic well: the orbit escapes
  auto m = model("0.5*y^2 - y^3/3 + 0.5*x^2");
  PrereqOptions opt;
  opt.max_time = 200;
  EXPECT_THROW(integrate_orbit(m, -2.0, 0.5 * 4 + 8.0 / 3.0, opt), NumericalError);
}

TEST(Orbit, CsvExport) {
  auto m = model("0.5*(x^2+y^2)");
  auto o = compute_prerequisites(m, 0.5);
  std::ostringstream os;
  write_prerequisites_csv(o, os);
  std::string s = os.str();
  EXPECT_EQ(s.rfind("t,y,ydot,xi1,xi1dot,xi2,xi2dot,eta1,eta1dot,eta2,eta2dot\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), o.grid.size() + 1);
}
