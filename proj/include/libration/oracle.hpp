#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "libration/derivatives.hpp"
#include "libration/variational.hpp"

namespace libration {

/// Full-state integrator for H = 1/2 (px^2 + py^2) + V + delta F, independent of
/// the variational machinery. Used to check the analytic derivatives.
struct OracleOptions {
  std::size_t steps_per_period = 2048;  // fixed step h = T(eps0) / steps
  double dead_band = 0.25;              // fraction of T before a crossing counts
  double max_periods = 3.0;
  int newton_iterations = 50;
  double h_qp = 1e-3;                   // scaled by max(1, |y_max|)
  double h_eps = 1e-4;
  double h_delta = 1e-4;
  int richardson_levels = 3;            // step levels in the extrapolation table
};

using State4 = std::array<double, 4>;  // (x, y, px, py)

struct SectionHit {
  double q = 0.0;  // x at the return
  double p = 0.0;  // px at the return
  double time = 0.0;
  State4 state{};
  double py_dot = 0.0;  // sign of the crossing (negative)
};

class PoincareOracle {
 public:
  /// energy0 is the base energy E0; the map at eps lives on energy E0 + eps.
  /// y_hint seeds the turning-point search (any point near y_max(eps0)).
  PoincareOracle(Model model, double energy0, double eps0, double y_hint,
                 OracleOptions options = {});

  double eps0() const { return eps0_; }
  double energy0() const { return energy0_; }
  double y_max(double eps) const;  // V(0, y) = E0 + eps, Newton from y_max(eps0)
  double reference_y_max() const { return y_ref_; }
  double reference_period() const { return period_; }
  double step() const { return h_; }
  const Model& model() const { return model_; }
  const OracleOptions& options() const { return options_; }

  /// y0 solving 1/2 p^2 + V(q, y0) + delta F(q, y0, p, 0) = E0 + eps.
  double start_y(double q, double p, double eps, double delta) const;

  /// Return to p_y = 0 going downward after the dead band, by fixed rkf78
  /// steps with the last partial step refined by Newton on its length.
  SectionHit map(double q, double p, double eps, double delta) const;

  /// Fixed-time flow of the full state with steps of at most step().
  State4 flow(const State4& a, double delta, double t) const;

  State4 rhs(const State4& a, double delta) const;

 private:
  State4 rk_step(const State4& a, double delta, double h) const;

  Model model_;
  double energy0_, eps0_;
  OracleOptions options_;
  double y_ref_ = 0.0;
  double period_ = 0.0;
  double h_ = 0.0;
};

struct FdValue {
  double value = 0.0;
  double error = 0.0;  // distance between neighbouring Richardson levels
};

/// Richardson-extrapolated central differences for all 38 derivatives of the
/// map in the given chart. Map evaluations are cached across entries.
std::array<FdValue, kNumDerivatives> fd_derivatives(const PoincareOracle& oracle,
                                                    const Chart& chart = Chart::identity());

/// d^|idx| x^r(t) / d a^idx at a = (0, y_max, 0, 0), delta = 0, for the fixed
/// time flow. idx entries are 1..5 (5 = delta).
FdValue flow_derivative_fd(const PoincareOracle& oracle, int r, const MultiIndex& idx, double t);

/// Tensor-product central difference of f : R^n -> R with per-axis counts
/// 0..3 and steps h, Richardson-extrapolated over `levels` step sizes.
template <std::size_t N, class F>
FdValue mixed_difference(F&& f, const std::array<int, N>& counts, const std::array<double, N>& h,
                         int levels = 3);

enum class Verdict { pass, fail, inconclusive };
const char* to_string(Verdict v);

struct CompareEntry {
  std::string key;
  DerivativeGroup group;
  double analytic = 0.0;
  double numeric = 0.0;
  double fd_error = 0.0;
  double rel_error = 0.0;  // |a - n| / max(|n|, floor)
  double tolerance = 0.0;
  Verdict verdict = Verdict::pass;
};

struct CompareOptions {
  double tol_first = 1e-5;
  double tol_second = 1e-4;
  double tol_third = 1e-3;
  double floor = 1e-2;
};

double group_tolerance(DerivativeGroup g, const CompareOptions& options);

struct CompareReport {
  std::vector<CompareEntry> entries;
  std::size_t passed = 0, failed = 0, inconclusive = 0;
  bool ok() const { return failed == 0 && inconclusive == 0; }
};

CompareReport compare(const PoincareDerivatives& analytic,
                      const std::array<FdValue, kNumDerivatives>& numeric,
                      const CompareOptions& options = {});

// ---------------------------------------------------------------------------

namespace detail {

struct StencilPoint {
  int offset;  // multiples of the step
  double weight;
};

inline std::vector<StencilPoint> stencil(int order) {
  switch (order) {
    case 0: return {{0, 1.0}};
    case 1: return {{-1, -0.5}, {1, 0.5}};
    case 2: return {{-1, 1.0}, {0, -2.0}, {1, 1.0}};
    case 3: return {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
    default: throw std::invalid_argument("difference order above 3");
  }
}

}  // namespace detail

template <std::size_t N, class F>
FdValue mixed_difference(F&& f, const std::array<int, N>& counts, const std::array<double, N>& h,
                         int levels) {
  // Steps h 2^(levels-2), ..., 2h, h, h/2 in a Richardson table. The value is
  // the second-to-last diagonal entry of the finest row; the estimate is its
  // distance from the same entry one row up.
  if (levels < 2) throw std::invalid_argument("Richardson needs at least two levels");
  auto at_scale = [&](double divisor) {
    std::array<std::vector<detail::StencilPoint>, N> st;
    std::array<std::size_t, N> pos{};
    double scale = 1.0;
    for (std::size_t a = 0; a < N; ++a) {
      st[a] = detail::stencil(counts[a]);
      for (int k = 0; k < counts[a]; ++k) scale *= h[a] / divisor;
    }
    double sum = 0.0;
    while (true) {
      std::array<double, N> offset{};
      double w = 1.0;
      for (std::size_t a = 0; a < N; ++a) {
        offset[a] = st[a][pos[a]].offset * (h[a] / divisor);
        w *= st[a][pos[a]].weight;
      }
      sum += w * f(offset);
      std::size_t a = 0;
      for (; a < N; ++a) {
        if (++pos[a] < st[a].size()) break;
        pos[a] = 0;
      }
      if (a == N) break;
    }
    return sum / scale;
  };
  const auto L = static_cast<std::size_t>(levels);
  std::vector<std::vector<double>> t(L);
  for (std::size_t k = 0; k < L; ++k) {
    t[k].push_back(at_scale(std::ldexp(1.0, static_cast<int>(k) + 2 - levels)));
    double four = 1.0;
    for (std::size_t j = 1; j <= k; ++j) {
      four *= 4.0;
      t[k].push_back((four * t[k][j - 1] - t[k - 1][j - 1]) / (four - 1.0));
    }
  }
  if (L == 2) return {t[1][1], std::abs(t[1][1] - t[1][0])};
  const double value = t[L - 1][L - 2];
  return {value, std::abs(value - t[L - 2][L - 2])};
}

}  // namespace libration
