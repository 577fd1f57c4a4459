#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "libration/bifurcate.hpp"
#include "libration/errors.hpp"
#include "libration/oracle.hpp"
#include "libration/pipeline.hpp"
#include "fork_branch.hpp"
#include "models.hpp"

using namespace libration;
using libration::testing::make_model;

namespace {

PoincareDerivatives with_jacobian(double qq, double qp, double pq, double pp) {
  PoincareDerivatives d;
  d["Q_q"] = qq;
  d["Q_p"] = qp;
  d["P_q"] = pq;
  d["P_p"] = pp;
  return d;
}

std::array<double, 4> mul(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

std::array<double, 4> normal_form(const AdaptedFrame& f, const PoincareDerivatives& d) {
  const std::array<double, 4> m{d["Q_q"], d["Q_p"], d["P_q"], d["P_p"]};
  return mul(f.s_inv.s, mul(m, f.s.s));
}

Chart random_chart(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (;;) {
    const double a = u(rng), b = u(rng), c = u(rng);
    if (std::abs(a) < 0.3) continue;
    return Chart{{a, b, c, (1.0 + b * c) / a}};
  }
}

const char* kFork = "0.5*y^2 + 0.5*(1 + y^2)*x^2";

// First trace = 2 crossing of the fork family, shared by several tests.
const SweepRoot& fork_root() {
  static const SweepRoot root = [] {
    auto r = sweep(make_model(kFork), 0.0, 2.5, 3.0, 3);
    if (r.roots.size() != 1) throw std::runtime_error("fork family lost its crossing");
    return r.roots.front();
  }();
  return root;
}

}  // namespace

TEST(AdaptedFrame, AlreadyNormal) {
  auto f = adapted_frame(with_jacobian(1, 1, 0, 1));
  EXPECT_EQ(f.s.s, (std::array<double, 4>{1, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(f.twist(), 1.0);
}

TEST(AdaptedFrame, LowerTriangular) {
  auto f = adapted_frame(with_jacobian(1, 0, 1, 1));
  // rotation by -pi/2
  EXPECT_EQ(f.s.s, (std::array<double, 4>{0, 1, -1, 0}));
  EXPECT_DOUBLE_EQ(f.twist(), -1.0);

  auto g = adapted_frame(with_jacobian(1, 0, 4, 1));
  auto nf = normal_form(g, with_jacobian(1, 0, 4, 1));
  EXPECT_NEAR(nf[0], 1, 1e-15);
  EXPECT_NEAR(nf[1], -1, 1e-15);
  EXPECT_NEAR(nf[2], 0, 1e-15);
  EXPECT_NEAR(nf[3], 1, 1e-15);
  EXPECT_NEAR(g.s.det(), 1.0, 1e-15);
}

TEST(AdaptedFrame, IdentityIsDegenerate) {
  EXPECT_THROW(adapted_frame(with_jacobian(1, 0, 0, 1)), DegenerateFrameError);
  EXPECT_THROW(adapted_frame(with_jacobian(1.2, 0, 0, 0.6)), std::domain_error);
}

TEST(AdaptedFrame, RandomSingularMatrices) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 50; ++k) {
    const Chart c = random_chart(rng);
    const double b = u(rng);
    const auto m = mul(c.s, mul({1, b, 0, 1}, c.inverse().s));
    const auto d = with_jacobian(m[0], m[1], m[2], m[3]);
    auto f = adapted_frame(d);
    EXPECT_NEAR(f.s.det(), 1.0, 1e-12);
    auto nf = normal_form(f, d);
    EXPECT_NEAR(nf[0], 1, 1e-12);
    EXPECT_NEAR(std::abs(nf[1]), 1, 1e-12);
    EXPECT_NEAR(nf[2], 0, 1e-12);
    EXPECT_NEAR(nf[3], 1, 1e-12);
    EXPECT_NEAR(f.twist(), nf[1], 1e-12);
  }
}

TEST(ChangeChart, RoundTrip) {
  auto d = analyze(make_model("0.5*y^2 + 0.7*x^2 + 0.5*x^2*y + 0.1*x^3", "x^2*y + px^2"), 0.2, 0.0)
               .derivatives;
  std::mt19937 rng(3);
  const Chart c = random_chart(rng);
  auto back = change_chart(change_chart(d, c), c.inverse());
  for (std::size_t i = 0; i < kNumDerivatives; ++i)
    EXPECT_NEAR(back.values[i], d.values[i], 1e-11 * std::max(1.0, std::abs(d.values[i])))
        << derivative_specs()[i].key;
}

TEST(ChangeChart, MatchesOracleInThatChart) {
  auto m = make_model("0.5*y^2 + 0.7*x^2 + 0.5*x^2*y + 0.1*x^3", "x^2*y + y^3");
  auto a = analyze(m, 0.2, 0.0);
  std::mt19937 rng(11);
  const Chart c = random_chart(rng);
  PoincareOracle o(m, 0.2, 0.0, a.orbit.y_max);
  auto rep = compare(change_chart(a.derivatives, c), fd_derivatives(o, c));
  EXPECT_EQ(rep.failed, 0u);
  EXPECT_LT(rep.inconclusive, 4u);
}

TEST(Classify, Cascade) {
  auto d = with_jacobian(0.6, 1, 0, 0.6);
  EXPECT_EQ(classify(d).verdict, BifurcationVerdict::regular);

  d = with_jacobian(1, 1, 0, 1);
  EXPECT_EQ(classify(d).verdict, BifurcationVerdict::singular_nontransversal);

  d["Q_qe"] = 0.3;
  d["P_qq"] = 0.1;
  auto r = classify(d);
  EXPECT_EQ(r.verdict, BifurcationVerdict::cross_transcritical);
  EXPECT_FALSE(r.fork_curvature);
  EXPECT_DOUBLE_EQ(r.trace_prime, 0.3);

  d["P_qq"] = 0.0;
  d["P_qqq"] = -6.0;
  d["P_qe"] = 1.0;
  r = classify(d);
  ASSERT_EQ(r.verdict, BifurcationVerdict::cross_fork);
  EXPECT_DOUBLE_EQ(*r.fork_curvature, 2.0);

  d["P_qe"] = 0.0;
  EXPECT_EQ(classify(d).verdict, BifurcationVerdict::cross_degenerate);

  d["P_qe"] = 1.0;
  d["P_qqq"] = 0.0;
  EXPECT_EQ(classify(d).verdict, BifurcationVerdict::cross_degenerate);

  auto id = with_jacobian(1, 0, 0, 1);
  EXPECT_EQ(classify(id).verdict, BifurcationVerdict::degenerate_frame);
  id["P_pe"] = 0.5;
  EXPECT_EQ(classify(id).verdict, BifurcationVerdict::degenerate_frame);
}

TEST(Classify, EchoesDeformationSensitivities) {
  auto d = with_jacobian(0.6, 1, 0, 0.6);
  d["P_ppd"] = 4.5;
  d["Q_qd"] = -1.0;
  auto r = classify(d);
  EXPECT_EQ(r.deformation_sensitivities.front(), -1.0);
  EXPECT_EQ(r.deformation_sensitivities.back(), 4.5);
}

TEST(Sweep, HarmonicHasNoRoots) {
  auto r = sweep(make_model("0.5*(0.09*x^2 + y^2)"), 0.0, 0.1, 1.0, 6);
  ASSERT_EQ(r.samples.size(), 6u);
  EXPECT_TRUE(r.roots.empty());
  for (const auto& s : r.samples) {
    EXPECT_FALSE(s.error);
    EXPECT_NEAR(s.trace, 2 * std::cos(2 * std::numbers::pi * 0.3), 1e-8);
    EXPECT_NEAR(s.trace_prime, 0.0, 1e-8);
  }
  EXPECT_DOUBLE_EQ(r.samples.front().eps, 0.1);
  EXPECT_DOUBLE_EQ(r.samples.back().eps, 1.0);
}

TEST(Sweep, RootsAreRefinedAndBracketed) {
  auto m = make_model("0.5*y^2 + 0.5*(0.8 + y)*x^2");
  auto r = sweep(m, 0.0, 0.05, 3.0, 12);
  ASSERT_FALSE(r.roots.empty());
  for (std::size_t i = 1; i < r.samples.size(); ++i)
    EXPECT_GT(r.samples[i].eps, r.samples[i - 1].eps);
  for (const auto& root : r.roots) {
    EXPECT_TRUE(root.converged);
    EXPECT_LE(std::abs(root.trace - 2.0), 1e-9);
    EXPECT_LE(std::abs(trace_only(m, root.eps).trace - 2.0), 1e-9);
    // dense re-sampling brackets the root
    const double h = 1e-4;
    const double lo = trace_only(m, root.eps - h).trace - 2.0;
    const double hi = trace_only(m, root.eps + h).trace - 2.0;
    EXPECT_LT(lo * hi, 0.0) << root.eps;
  }
}

TEST(Sweep, FailuresAreRecorded) {
  // the well opens at y = 1 / 0.9, V = 0.206
  auto r = sweep(make_model("0.5*y^2 - 0.3*y^3 + 0.5*x^2"), 0.0, 0.1, 0.4, 4);
  ASSERT_EQ(r.samples.size(), 4u);
  EXPECT_FALSE(r.samples.front().error);
  EXPECT_TRUE(r.samples.back().error);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  auto m = make_model(kFork);
  SweepOptions one, many;
  one.threads = 1;
  many.threads = 3;
  auto a = sweep(m, 0.0, 2.0, 3.5, 7, one), b = sweep(m, 0.0, 2.0, 3.5, 7, many);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_EQ(a.samples[i].trace, b.samples[i].trace);
  ASSERT_EQ(a.roots.size(), b.roots.size());
  EXPECT_EQ(a.roots[0].eps, b.roots[0].eps);
}

TEST(ForkFamily, ClassifiedAsFork) {
  const auto& root = fork_root();
  EXPECT_LE(std::abs(root.trace - 2.0), 1e-9);
  auto a = analyze(make_model(kFork), 0.0, root.eps);
  auto r = classify(a.derivatives);
  ASSERT_TRUE(r.frame);
  // odd map: the transcritical coefficient vanishes by symmetry
  EXPECT_LE(std::abs(r.frame->tilde["P_qq"]), 1e-10);
  EXPECT_NE(r.verdict, BifurcationVerdict::cross_transcritical);
  ASSERT_EQ(r.verdict, BifurcationVerdict::cross_fork);
  EXPECT_GT(std::abs(r.trace_prime), 1e-3);
}

// Continue the bifurcating fixed points of the integrated map in the adapted
// frame and fit eps(q~) = c0 + c2 q~^2 + c4 q~^4.
TEST(ForkFamily, CurvatureMatchesContinuedBranch) {
  const auto& root = fork_root();
  auto m = make_model(kFork);
  auto a = analyze(m, 0.0, root.eps);
  auto rep = classify(a.derivatives);
  ASSERT_EQ(rep.verdict, BifurcationVerdict::cross_fork);
  const double curv = *rep.fork_curvature;

  PoincareOracle o(m, 0.0, root.eps, a.orbit.y_max);
  auto fit = libration::testing::fit_fork_branch(o, *rep.frame, root.eps, curv);
  ASSERT_TRUE(fit.failure.empty()) << fit.failure;
  EXPECT_NEAR(fit.c0, root.eps, 1e-6);
  EXPECT_GT(fit.curvature * curv, 0.0);
  EXPECT_LE(std::abs(fit.curvature - curv) / std::abs(curv), 0.05)
      << "analytic " << curv << " fitted " << fit.curvature;
}

// The verdict and eps_B'' are properties of the map, not of the chart it is
// written in: feed the integrated map through random symplectic charts.
TEST(ForkFamily, FrameInvariance) {
  const auto& root = fork_root();
  auto m = make_model(kFork);
  auto a = analyze(m, 0.0, root.eps);
  const double curv = *classify(a.derivatives).fork_curvature;
  // third-order entries in a stretched chart need the deeper Richardson table
  OracleOptions fine;
  fine.h_qp = 1.5e-3;
  fine.richardson_levels = 4;
  PoincareOracle o(m, 0.0, root.eps, a.orbit.y_max, fine);
  std::mt19937 rng(5);
  for (int k = 0; k < 3; ++k) {
    const Chart c = random_chart(rng);
    auto fd = fd_derivatives(o, k == 0 ? Chart::identity() : c);
    PoincareDerivatives d = a.derivatives;
    for (std::size_t i = 0; i < kNumDerivatives; ++i) d.values[i] = fd[i].value;
    auto r = classify(d);
    ASSERT_EQ(r.verdict, BifurcationVerdict::cross_fork) << k;
    EXPECT_NEAR(*r.fork_curvature / curv, 1.0, 1e-6) << k;
    // exact transform of the analytic numbers
    auto t = classify(change_chart(a.derivatives, c));
    EXPECT_NEAR(*t.fork_curvature / curv, 1.0, 1e-10);
  }
}

TEST(ForkFamily, EvenPotentialsAreNeverTranscritical) {
  for (const char* v : {"0.5*y^2 + 0.5*(0.9 + 0.5*y^2)*x^2 + 0.05*x^4",
                        "0.5*y^2 + 0.1*y^3 + 0.5*(1 + y^2)*x^2 + 0.1*x^4*y"}) {
    auto m = make_model(v);
    auto r = sweep(m, 0.0, 0.05, 3.0, 12);
    for (const auto& root : r.roots) {
      auto rep = classify(analyze(m, 0.0, root.eps).derivatives);
      EXPECT_NE(rep.verdict, BifurcationVerdict::cross_transcritical) << v << " at " << root.eps;
    }
  }
}
