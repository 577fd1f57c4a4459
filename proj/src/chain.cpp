#include "libration/chain.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "libration/errors.hpp"

namespace libration {

namespace {

// Restricted growth strings: blocks[k] is the block of position k.
std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int k, int used) {
    if (k == n) {
      out.push_back(a);
      return;
    }
    for (int b = 0; b <= used; ++b) {
      a[static_cast<std::size_t>(k)] = b;
      rec(k + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

// Faa di Bruno for G(u) = outer(w(u)): sum over partitions of l and over
// the outer variable attached to each block.
double composite(const MultiIndex& l, const std::vector<int>& vars,
                 const std::function<double(const MultiIndex&)>& outer,
                 const std::function<double(int, const MultiIndex&)>& inner) {
  double total = 0.0;
  for (const auto& part : set_partitions(l.order())) {
    int nb = 0;
    for (int b : part) nb = std::max(nb, b + 1);
    std::vector<MultiIndex> blocks(static_cast<std::size_t>(nb));
    for (int k = 0; k < l.order(); ++k)
      blocks[static_cast<std::size_t>(part[static_cast<std::size_t>(k)])] =
          blocks[static_cast<std::size_t>(part[static_cast<std::size_t>(k)])].with(l[k]);
    // odometer over the variable chosen for each block
    std::vector<std::size_t> pick(blocks.size(), 0);
    while (true) {
      double w = 1.0;
      MultiIndex outer_idx;
      for (std::size_t b = 0; b < blocks.size() && w != 0.0; ++b) {
        const int v = vars[pick[b]];
        w *= inner(v, blocks[b]);
        outer_idx = outer_idx.with(v);
      }
      if (w != 0.0) total += w * outer(outer_idx);
      std::size_t b = 0;
      for (; b < blocks.size(); ++b) {
        if (++pick[b] < vars.size()) break;
        pick[b] = 0;
      }
      if (b == blocks.size()) break;
    }
  }
  return total;
}

PhasePoint turning_point(double y_max) { return {0.0, y_max, 0.0, 0.0}; }

void fill_orbit_data(ZTables& z, const Model& model, double y_max) {
  const PhasePoint p = turning_point(y_max);
  z.v2 = model.potential.partial_value(PartialIndex{Var::y}, p);
  z.v11 = model.potential.partial_value(PartialIndex{Var::x, Var::x}, p);
  z.v111 = model.potential.partial_value(PartialIndex{Var::x, Var::x, Var::x}, p);
  z.f = model.deformation ? model.deformation->value(p) : 0.0;
  if (z.v2 == 0.0) throw NumericalError("V_y vanishes at the turning point");
}

// a^lambda for lambda in {1, 3, 4, 5} as functions of u.
double fixed_component(int lambda, const MultiIndex& l) {
  const bool single = l.order() == 1;
  switch (lambda) {
    case 1: return single && l[0] == 1 ? 1.0 : 0.0;
    case 3: return single && l[0] == 2 ? 1.0 : 0.0;
    case 4: return 0.0;
    case 5: return single && l[0] == 4 ? 1.0 : 0.0;
    default: throw std::logic_error("not a fixed component");
  }
}

}  // namespace

double ZTables::operator()(int lambda, const MultiIndex& l) const {
  if (lambda == 0 || lambda == 2) {
    const auto& m = lambda == 0 ? z0 : z2;
    auto it = m.find(l);
    if (it == m.end())
      throw std::out_of_range("Z^" + std::to_string(lambda) + "_" + l.to_string() +
                              " was not computed");
    return it->second;
  }
  return fixed_component(lambda, l);
}

ZTables explicit_z_tables(const FlowTables& t, const Model& model, double y_max) {
  ZTables z;
  fill_orbit_data(z, model, y_max);
  const double v2 = z.v2, v11 = z.v11;
  auto x4 = [&](std::initializer_list<int> idx) { return t.at_end(4, MultiIndex(idx)); };

  z.z2[MultiIndex{1}] = 0.0;
  z.z2[MultiIndex{2}] = 0.0;
  z.z2[MultiIndex{3}] = 1.0 / v2;
  z.z2[MultiIndex{1, 1}] = -v11 / v2;
  z.z2[MultiIndex{1, 2}] = 0.0;
  z.z2[MultiIndex{2, 2}] = -1.0 / v2;
  z.z2[MultiIndex{1, 3}] = 0.0;
  z.z2[MultiIndex{2, 3}] = 0.0;

  z.z0[MultiIndex{1}] = x4({1}) / v2;
  z.z0[MultiIndex{2}] = x4({3}) / v2;
  z.z0[MultiIndex{3}] = x4({2}) / (v2 * v2);
  z.z0[MultiIndex{1, 1}] = x4({1, 1}) / v2 - v11 * x4({2}) / (v2 * v2);
  z.z0[MultiIndex{1, 2}] = x4({1, 3}) / v2;
  z.z0[MultiIndex{2, 2}] = x4({3, 3}) / v2 - x4({2}) / (v2 * v2);
  z.z0[MultiIndex{1, 3}] = 0.0;
  z.z0[MultiIndex{2, 3}] = 0.0;

  if (model.deformed()) {
    z.z2[MultiIndex{4}] = -z.f / v2;
    z.z2[MultiIndex{1, 4}] = 0.0;
    z.z2[MultiIndex{2, 4}] = 0.0;
    z.z0[MultiIndex{4}] = -z.f * x4({2}) / (v2 * v2) + x4({5}) / v2;
    z.z0[MultiIndex{1, 4}] = x4({1, 5}) / v2;
    z.z0[MultiIndex{2, 4}] = x4({3, 5}) / v2;
  }
  return z;
}

ZTables generic_z_tables(const FlowTables& t, const Model& model, double y_max) {
  ZTables z;
  fill_orbit_data(z, model, y_max);
  const PhasePoint p = turning_point(y_max);
  const int top = model.deformed() ? 4 : 3;

  std::vector<MultiIndex> order;
  for (int a = 1; a <= top; ++a) order.push_back(MultiIndex{a});
  for (int a = 1; a <= top; ++a)
    for (int b = a; b <= top; ++b)
      if (!(a == 4 && b == 4)) order.push_back(MultiIndex{a, b});
  for (int a = 1; a <= top; ++a)
    for (int b = a; b <= top; ++b)
      for (int c = b; c <= top; ++c) {
        MultiIndex m{a, b, c};
        if (m.count(4) <= 1) order.push_back(m);
      }

  // Energy condition Phi(x, y, px, eps, delta) = 1/2 px^2 + V(x, y) +
  // delta F(x, y, px, 0) - E0 - eps. Outer variable 0 stands for eps here.
  auto phi = [&](const MultiIndex& vars) -> double {
    if (vars.contains(0)) return vars.order() == 1 ? -1.0 : 0.0;
    const int nd = vars.count(5);
    if (nd > 1) return 0.0;
    std::array<std::uint8_t, kNumVars> c{};
    for (int k = 0; k < vars.order(); ++k)
      if (vars[k] != 5) ++c[static_cast<std::size_t>(vars[k] - 1)];
    if (nd == 1) {
      if (!model.deformation) return 0.0;
      return model.deformation->partial_value(PartialIndex::from_counts(c), p);
    }
    if (c[2] > 0) return (c[2] == 2 && vars.order() == 2) ? 1.0 : 0.0;
    return model.potential.partial_value(PartialIndex::from_counts(c), p);
  };
  auto phi_inner = [&](int v, const MultiIndex& b) -> double {
    switch (v) {
      case 0: return (b.order() == 1 && b[0] == 3) ? 1.0 : 0.0;
      case 2: return z.z2.at(b);
      default: return fixed_component(v, b);
    }
  };
  for (const auto& l : order) {
    z.z2[l] = 0.0;
    const double rest = composite(l, {0, 1, 2, 3, 5}, phi, phi_inner);
    z.z2[l] = -rest / z.v2;
  }

  // Return condition x^4(T(u), a(u)) = 0 with x^4_0(T) = -V_2.
  auto x4 = [&](const MultiIndex& vars) { return t.at_end(4, vars); };
  auto inner = [&](int v, const MultiIndex& b) -> double {
    switch (v) {
      case 0: return z.z0.at(b);
      case 2: return z.z2.at(b);
      default: return fixed_component(v, b);
    }
  };
  for (const auto& l : order) {
    z.z0[l] = 0.0;
    const double rest = composite(l, {0, 1, 2, 3, 5}, x4, inner);
    z.z0[l] = rest / z.v2;
  }
  return z;
}

double chain_derivative(const FlowTables& t, const ZTables& z, int r, const MultiIndex& l) {
  auto outer = [&](const MultiIndex& vars) { return t.at_end(r, vars); };
  auto inner = [&](int v, const MultiIndex& b) { return z(v, b); };
  return composite(l, {0, 1, 2, 3, 5}, outer, inner);
}

PoincareDerivatives assemble_generic(const FlowTables& t, const ZTables& z) {
  PoincareDerivatives d;
  const auto& specs = derivative_specs();
  for (std::size_t i = 0; i < kNumDerivatives; ++i) {
    const auto& s = specs[i];
    if (s.counts[3] > 0 && !z.z0.count(MultiIndex{4})) continue;  // undeformed
    MultiIndex l;
    for (std::size_t a = 0; a < 4; ++a)
      for (int k = 0; k < s.counts[a]; ++k) l = l.with(static_cast<int>(a) + 1);
    d.values[i] = chain_derivative(t, z, s.component, l);
  }
  d.period = t.period();
  return d;
}

PoincareDerivatives assemble(const FlowTables& t, const ZTables& z,
                             const FormulaOptions& options) {
  const double v11 = z.v11, v111 = z.v111;
  auto X = [&](int r, std::initializer_list<int> idx) { return t.at_end(r, MultiIndex(idx)); };
  // x^c_{0 lambda} and x^c_{0 lambda mu} at T for c in {1, 3}.
  auto D1 = [&](int c, int a) { return c == 1 ? X(3, {a}) : -v11 * X(1, {a}); };
  auto D2 = [&](int c, int a, int b) {
    return c == 1 ? X(3, {a, b}) : -v11 * X(1, {a, b}) - v111 * X(1, {a}) * X(1, {b});
  };
  auto ell = [](int a) { return a == 1 ? 1 : 2; };  // flow index -> u index
  auto Z2 = [&](std::initializer_list<int> l) { return z(2, MultiIndex(l)); };
  auto Z0 = [&](std::initializer_list<int> l) { return z(0, MultiIndex(l)); };
  auto Z2m = [&](const MultiIndex& l) { return z(2, l); };
  auto Z0m = [&](const MultiIndex& l) { return z(0, l); };

  PoincareDerivatives d;
  const int comps[2] = {1, 3};
  const char* names[2] = {"Q", "P"};

  for (int ci = 0; ci < 2; ++ci) {
    const int c = comps[ci];
    const std::string n = names[ci];
    d[n + "_q"] = X(c, {1});
    d[n + "_p"] = X(c, {3});
    d[n + "_qq"] = X(c, {1, 1});
    d[n + "_qp"] = X(c, {1, 3});
    d[n + "_pp"] = X(c, {3, 3});

    // pure third order
    const std::pair<const char*, std::array<int, 3>> third[4] = {
        {"qqq", {1, 1, 1}}, {"qqp", {1, 1, 3}}, {"qpp", {1, 3, 3}}, {"ppp", {3, 3, 3}}};
    for (const auto& [suffix, lam] : third) {
      double v = X(c, {lam[0], lam[1], lam[2]});
      for (std::size_t k = 0; k < 3; ++k) {
        MultiIndex rest;
        for (std::size_t j = 0; j < 3; ++j)
          if (j != k) rest = rest.with(ell(lam[j]));
        v += X(c, {lam[k], 2}) * Z2m(rest) + D1(c, lam[k]) * Z0m(rest);
      }
      d[n + "_" + suffix] = v;
    }

    // eps-mixed
    d[n + "_qe"] = X(c, {1, 2}) * Z2({3}) + D1(c, 1) * Z0({3});
    d[n + "_pe"] = X(c, {3, 2}) * Z2({3}) + D1(c, 3) * Z0({3});
    const std::pair<const char*, std::array<int, 2>> pairs[3] = {
        {"qq", {1, 1}}, {"qp", {1, 3}}, {"pp", {3, 3}}};
    for (const auto& [suffix, lam] : pairs)
      d[n + "_" + suffix + "e"] =
          X(c, {lam[0], lam[1], 2}) * Z2({3}) + D2(c, lam[0], lam[1]) * Z0({3});
  }

  if (options.third_order != RowForm::derived) {
    // As listed: both rows of the qpp pair use the q-index coefficient for Z0_12,
    // and the P row also takes the p-index one for Z0_22.
    d["Q_qpp"] = X(1, {1, 3, 3}) + X(1, {1, 2}) * Z2({2, 2}) + X(3, {1}) * Z0({2, 2}) +
                 2.0 * X(3, {1}) * Z0({1, 2});
    d["P_qpp"] = X(3, {1, 3, 3}) + X(3, {1, 2}) * Z2({2, 2}) - v11 * X(1, {3}) * Z0({2, 2}) -
                 2.0 * v11 * X(1, {1}) * Z0({1, 2});
  }

  if (z.z0.count(MultiIndex{4})) {
    for (int ci = 0; ci < 2; ++ci) {
      const int c = comps[ci];
      const std::string n = names[ci];
      for (int a : {1, 3})
        d[n + "_" + (a == 1 ? "q" : "p") + "d"] =
            X(c, {a, 5}) + X(c, {a, 2}) * Z2({4}) + D1(c, a) * Z0({4});
      const std::pair<const char*, std::array<int, 2>> pairs[3] = {
          {"qq", {1, 1}}, {"qp", {1, 3}}, {"pp", {3, 3}}};
      for (const auto& [suffix, lam] : pairs) {
        const int a = lam[0], b = lam[1];
        d[n + "_" + suffix + "d"] = X(c, {a, b, 5}) + X(c, {a, b, 2}) * Z2({4}) +
                                     D2(c, a, b) * Z0({4}) +
                                     D1(c, b) * Z0m(MultiIndex{ell(a), 4}) +
                                     D1(c, a) * Z0m(MultiIndex{ell(b), 4});
      }
    }
    if (options.delta_third != RowForm::derived) {
      const double z4 = Z0({4}), z14 = Z0({1, 4}), z24 = Z0({2, 4});
      d["Q_qpd"] = X(1, {1, 3, 5}) + X(1, {1, 2, 3}) * Z2({4}) + X(3, {1, 3}) * z4 +
                   X(3, {1}) * z14 + X(3, {3}) * z24;
      d["P_qqd"] = X(3, {1, 1, 5}) + X(3, {1, 1, 2}) * Z2({4}) - v11 * X(1, {1, 1}) * z4 -
                   2.0 * v11 * X(1, {1}) * z14;
      d["P_qpd"] = X(3, {1, 3, 5}) + X(3, {1, 2, 3}) * Z2({4}) - v11 * X(1, {1, 3}) * z4 -
                   v11 * (X(1, {3}) * z14 + X(1, {1}) * z24);
      if (options.delta_third == RowForm::literal)
        d["P_ppd"] = X(3, {3, 3, 5}) + X(3, {2, 3, 3}) * Z2({4}) - v11 * X(1, {1, 3}) * z4 -
                     2.0 * v11 * X(3, {1}) * z24;
      else
        d["P_ppd"] = X(3, {3, 3, 5}) + X(3, {2, 3, 3}) * Z2({4}) - v11 * X(1, {3, 3}) * z4 -
                     2.0 * v11 * X(1, {3}) * z24;
    }
  }

  d.period = t.period();
  return d;
}

}  // namespace libration
