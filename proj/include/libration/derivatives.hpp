#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace libration {

inline constexpr std::size_t kNumDerivatives = 38;

/// Tolerance classes used when comparing against finite differences.
enum class DerivativeGroup : std::uint8_t {
  first,         // Jacobian
  second,        // pure (q, p) second order
  third,         // pure (q, p) third order
  eps_second,    // Q_qe ... P_pe
  eps_third,     // Q_qqe ... P_ppe
  delta_second,  // Q_qd ... P_pd
  delta_third,   // Q_qqd ... P_ppd
};

/// One of the 38 partial derivatives of (Q, P) at (q, p, eps, delta) =
/// (0, 0, eps0, 0). Keys spell the differentiation variables after the
/// component: q, p, e for eps and d for delta, e.g. "P_qpd".
struct DerivativeSpec {
  const char* key;
  int component;                      // 1 for Q, 3 for P
  std::array<std::uint8_t, 4> counts; // derivatives by q, p, eps, delta
  DerivativeGroup group;

  int order() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

const std::array<DerivativeSpec, kNumDerivatives>& derivative_specs();
std::optional<std::size_t> derivative_index(std::string_view key);
const char* to_string(DerivativeGroup g);

/// The 38 numbers with the orbit data they were computed for.
struct PoincareDerivatives {
  std::array<double, kNumDerivatives> values{};
  double epsilon0 = 0.0;
  double energy = 0.0;
  double period = 0.0;
  double y_max = 0.0;

  /// Throws std::out_of_range for unknown keys.
  double& operator[](std::string_view key);
  double operator[](std::string_view key) const;

  double trace() const { return (*this)["Q_q"] + (*this)["P_p"]; }
  double trace_prime() const { return (*this)["Q_qe"] + (*this)["P_pe"]; }
};

/// Linear symplectic chart (q, p) = S (q~, p~).
struct Chart {
  std::array<double, 4> s{1.0, 0.0, 0.0, 1.0};  // row-major 2x2, det 1

  static Chart identity() { return {}; }
  double det() const { return s[0] * s[3] - s[1] * s[2]; }
  Chart inverse() const;  // throws std::invalid_argument when singular
};

/// Derivatives of S^{-1} o map o S, eps and delta untouched. Exact for the 38
/// entries because each one only mixes entries of the same (q, p) order.
PoincareDerivatives change_chart(const PoincareDerivatives& d, const Chart& chart);

}  // namespace libration
