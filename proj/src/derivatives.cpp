#include "libration/derivatives.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace libration {

namespace {

using G = DerivativeGroup;

constexpr std::array<DerivativeSpec, kNumDerivatives> kSpecs{{
    {"Q_q", 1, {1, 0, 0, 0}, G::first},
    {"Q_p", 1, {0, 1, 0, 0}, G::first},
    {"P_q", 3, {1, 0, 0, 0}, G::first},
    {"P_p", 3, {0, 1, 0, 0}, G::first},
    {"Q_qq", 1, {2, 0, 0, 0}, G::second},
    {"Q_qp", 1, {1, 1, 0, 0}, G::second},
    {"Q_pp", 1, {0, 2, 0, 0}, G::second},
    {"P_qq", 3, {2, 0, 0, 0}, G::second},
    {"P_qp", 3, {1, 1, 0, 0}, G::second},
    {"P_pp", 3, {0, 2, 0, 0}, G::second},
    {"Q_qqq", 1, {3, 0, 0, 0}, G::third},
    {"Q_qqp", 1, {2, 1, 0, 0}, G::third},
    {"Q_qpp", 1, {1, 2, 0, 0}, G::third},
    {"Q_ppp", 1, {0, 3, 0, 0}, G::third},
    {"P_qqq", 3, {3, 0, 0, 0}, G::third},
    {"P_qqp", 3, {2, 1, 0, 0}, G::third},
    {"P_qpp", 3, {1, 2, 0, 0}, G::third},
    {"P_ppp", 3, {0, 3, 0, 0}, G::third},
    {"Q_qe", 1, {1, 0, 1, 0}, G::eps_second},
    {"Q_pe", 1, {0, 1, 1, 0}, G::eps_second},
    {"P_qe", 3, {1, 0, 1, 0}, G::eps_second},
    {"P_pe", 3, {0, 1, 1, 0}, G::eps_second},
    {"Q_qqe", 1, {2, 0, 1, 0}, G::eps_third},
    {"Q_qpe", 1, {1, 1, 1, 0}, G::eps_third},
    {"Q_ppe", 1, {0, 2, 1, 0}, G::eps_third},
    {"P_qqe", 3, {2, 0, 1, 0}, G::eps_third},
    {"P_qpe", 3, {1, 1, 1, 0}, G::eps_third},
    {"P_ppe", 3, {0, 2, 1, 0}, G::eps_third},
    {"Q_qd", 1, {1, 0, 0, 1}, G::delta_second},
    {"Q_pd", 1, {0, 1, 0, 1}, G::delta_second},
    {"P_qd", 3, {1, 0, 0, 1}, G::delta_second},
    {"P_pd", 3, {0, 1, 0, 1}, G::delta_second},
    {"Q_qqd", 1, {2, 0, 0, 1}, G::delta_third},
    {"Q_qpd", 1, {1, 1, 0, 1}, G::delta_third},
    {"Q_ppd", 1, {0, 2, 0, 1}, G::delta_third},
    {"P_qqd", 3, {2, 0, 0, 1}, G::delta_third},
    {"P_qpd", 3, {1, 1, 0, 1}, G::delta_third},
    {"P_ppd", 3, {0, 2, 0, 1}, G::delta_third},
}};

// Index of the entry with this component and counts, or -1.
int find_entry(int component, int nq, int np, int ne, int nd) {
  for (std::size_t i = 0; i < kSpecs.size(); ++i) {
    const auto& sp = kSpecs[i];
    if (sp.component == component && sp.counts[0] == nq && sp.counts[1] == np &&
        sp.counts[2] == ne && sp.counts[3] == nd)
      return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

const std::array<DerivativeSpec, kNumDerivatives>& derivative_specs() { return kSpecs; }

std::optional<std::size_t> derivative_index(std::string_view key) {
  for (std::size_t i = 0; i < kSpecs.size(); ++i)
    if (key == kSpecs[i].key) return i;
  return std::nullopt;
}

const char* to_string(DerivativeGroup g) {
  switch (g) {
    case G::first: return "first";
    case G::second: return "second";
    case G::third: return "third";
    case G::eps_second: return "eps_second";
    case G::eps_third: return "eps_third";
    case G::delta_second: return "delta_second";
    case G::delta_third: return "delta_third";
  }
  return "?";
}

double& PoincareDerivatives::operator[](std::string_view key) {
  auto i = derivative_index(key);
  if (!i) throw std::out_of_range("unknown derivative key '" + std::string(key) + "'");
  return values[*i];
}

double PoincareDerivatives::operator[](std::string_view key) const {
  auto i = derivative_index(key);
  if (!i) throw std::out_of_range("unknown derivative key '" + std::string(key) + "'");
  return values[*i];
}

Chart Chart::inverse() const {
  const double d = det();
  if (std::abs(d) < 1e-300) throw std::invalid_argument("singular chart");
  return Chart{{s[3] / d, -s[1] / d, -s[2] / d, s[0] / d}};
}

PoincareDerivatives change_chart(const PoincareDerivatives& d, const Chart& chart) {
  const auto& s = chart.s;
  const auto inv = chart.inverse().s;
  PoincareDerivatives out = d;
  for (std::size_t i = 0; i < kSpecs.size(); ++i) {
    const auto& sp = kSpecs[i];
    // tilde axes being differentiated, 0 = q~, 1 = p~
    std::array<int, 3> axes{};
    int k = 0;
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < sp.counts[static_cast<std::size_t>(a)]; ++c) axes[static_cast<std::size_t>(k++)] = a;
    const int row = sp.component == 1 ? 0 : 1;
    double v = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double lead = inv[static_cast<std::size_t>(2 * row + j)];
      if (lead == 0.0) continue;
      // sum over original axes c_1..c_k
      for (int mask = 0; mask < (1 << k); ++mask) {
        double w = lead;
        int nq = 0, np = 0;
        for (int m = 0; m < k; ++m) {
          const int c = (mask >> m) & 1;
          (c == 0 ? nq : np)++;
          w *= s[static_cast<std::size_t>(2 * c + axes[static_cast<std::size_t>(m)])];
        }
        if (w == 0.0) continue;
        const int src = find_entry(j == 0 ? 1 : 3, nq, np, sp.counts[2], sp.counts[3]);
        v += w * d.values[static_cast<std::size_t>(src)];
      }
    }
    out.values[i] = v;
  }
  return out;
}

}  // namespace libration
