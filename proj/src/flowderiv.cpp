#include "libration/flowderiv.hpp"

#include <algorithm>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>

#include "libration/errors.hpp"

namespace libration {

const char* to_string(RowForm form) {
  switch (form) {
    case RowForm::derived: return "derived";
    case RowForm::literal: return "literal";
    case RowForm::symmetric: return "symmetric";
  }
  return "?";
}

RowForm parse_row_form(std::string_view text) {
  if (text == "derived") return RowForm::derived;
  if (text == "literal") return RowForm::literal;
  if (text == "symmetric") return RowForm::symmetric;
  throw std::invalid_argument("unknown formula form '" + std::string(text) +
                              "' (expected derived, literal or symmetric)");
}

namespace {

bool in13(int a) { return a == 1 || a == 3; }

Pair pair_of(int r) { return (r == 1 || r == 3) ? Pair::p13 : Pair::p24; }

EntryKey X(int r, int a) { return {r, MultiIndex{a}}; }
EntryKey X(int r, int a, int b) { return {r, MultiIndex{a, b}}; }

Term T(double s, CoefRef c, std::vector<EntryKey> f) { return {s, c, std::move(f)}; }

struct Split {
  std::vector<int> a;  // indices in {1,3}
  std::vector<int> b;  // indices in {2,4}
};

Split split(const MultiIndex& idx) {
  Split s;
  for (int k = 0; k < idx.order(); ++k) {
    int v = idx[k];
    if (v == 5) continue;
    (in13(v) ? s.a : s.b).push_back(v);
  }
  return s;
}

// Pure second order, no deformation index.
Inhomogeneity row2(int r, const Split& s) {
  Inhomogeneity g;
  auto& t = g.terms;
  if (r == 3) {
    if (s.a.size() == 2) t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, s.a[0]), X(1, s.a[1])}));
    if (s.a.size() == 1) t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, s.a[0]), X(2, s.b[0])}));
  } else if (r == 4) {
    if (s.a.size() == 2) t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, s.a[0]), X(1, s.a[1])}));
    if (s.b.size() == 2) t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, s.b[0]), X(2, s.b[1])}));
  }
  return g;
}

// Second order with one deformation index.
Inhomogeneity row2_delta(int r, int l) {
  Inhomogeneity g;
  auto& t = g.terms;
  if (in13(l)) {
    if (r == 1) {
      t.push_back(T(1, CoefRef::F({1, 3}), {X(1, l)}));
      t.push_back(T(1, CoefRef::F({3, 3}), {X(3, l)}));
    } else if (r == 3) {
      t.push_back(T(-1, CoefRef::F({1, 1}), {X(1, l)}));
      t.push_back(T(-1, CoefRef::F({1, 3}), {X(3, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(2, 5)}));
    }
  } else {
    if (r == 2) {
      t.push_back(T(1, CoefRef::F({2, 4}), {X(2, l)}));
      t.push_back(T(1, CoefRef::F({4, 4}), {X(4, l)}));
    } else if (r == 4) {
      t.push_back(T(-1, CoefRef::F({2, 2}), {X(2, l)}));
      t.push_back(T(-1, CoefRef::F({2, 4}), {X(4, l)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, l), X(2, 5)}));
    }
  }
  return g;
}

// Pure third order. Cases by how many indices lie in {1,3}.
Inhomogeneity row3(int r, const Split& s) {
  Inhomogeneity g;
  auto& t = g.terms;
  const std::size_t na = s.a.size();
  if (r == 3) {
    if (na == 3) {
      int l = s.a[0], m = s.a[1], n = s.a[2];
      t.push_back(T(-1, CoefRef::V({1, 1, 1, 1}), {X(1, l), X(1, m), X(1, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, l), X(1, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, m), X(1, n, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, n), X(1, l, m)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(2, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, m), X(2, n, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, n), X(2, l, m)}));
    } else if (na == 2) {
      int l = s.a[0], m = s.a[1], n = s.b[0];
      t.push_back(T(-1, CoefRef::V({1, 1, 1, 2}), {X(1, l), X(1, m), X(2, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, l), X(1, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, m), X(1, n, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(2, n), X(1, l, m)}));
    } else if (na == 1) {
      int l = s.a[0], m = s.b[0], n = s.b[1];
      t.push_back(T(-1, CoefRef::V({1, 1, 2, 2}), {X(1, l), X(2, m), X(2, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(2, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(2, m), X(1, n, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(2, n), X(1, l, m)}));
    }
  } else if (r == 4) {
    if (na == 3) {
      int l = s.a[0], m = s.a[1], n = s.a[2];
      t.push_back(T(-1, CoefRef::V({1, 1, 1, 2}), {X(1, l), X(1, m), X(1, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(1, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, m), X(1, n, l)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, n), X(1, l, m)}));
    } else if (na == 2) {
      int l = s.a[0], m = s.a[1], n = s.b[0];
      t.push_back(T(-1, CoefRef::V({1, 1, 2, 2}), {X(1, l), X(1, m), X(2, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(1, m, n)}));
      t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, m), X(1, n, l)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, n), X(2, l, m)}));
    } else if (na == 0) {
      int l = s.b[0], m = s.b[1], n = s.b[2];
      t.push_back(T(-1, CoefRef::V({2, 2, 2, 2}), {X(2, l), X(2, m), X(2, n)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, l), X(2, m, n)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, m), X(2, n, l)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, n), X(2, l, m)}));
    }
  }
  return g;
}

// Third order with one deformation index; l, m are the other two indices.
Inhomogeneity row3_delta(int r, const Split& s, const FormulaOptions& opt) {
  Inhomogeneity g;
  auto& t = g.terms;
  const EntryKey y5 = X(2, 5);
  if (s.a.size() == 2) {
    int l = s.a[0], m = s.a[1];
    switch (r) {
      case 1:
        t.push_back(T(1, CoefRef::F({1, 1, 3}), {X(1, l), X(1, m)}));
        t.push_back(T(1, CoefRef::F({1, 3, 3}), {X(1, l), X(3, m)}));
        t.push_back(T(1, CoefRef::F({1, 3, 3}), {X(3, l), X(1, m)}));
        t.push_back(T(1, CoefRef::F({3, 3, 3}), {X(3, l), X(3, m)}));
        t.push_back(T(1, CoefRef::F({1, 3}), {X(1, l, m)}));
        t.push_back(T(1, CoefRef::F({3, 3}), {X(3, l, m)}));
        break;
      case 2:
        t.push_back(T(1, CoefRef::F({1, 1, 4}), {X(1, l), X(1, m)}));
        t.push_back(T(1, CoefRef::F({1, 3, 4}), {X(1, l), X(3, m)}));
        t.push_back(T(1, CoefRef::F({1, 3, 4}), {X(3, l), X(1, m)}));
        t.push_back(T(1, CoefRef::F({3, 3, 4}), {X(3, l), X(3, m)}));
        t.push_back(T(1, CoefRef::F({2, 4}), {X(2, l, m)}));
        t.push_back(T(1, CoefRef::F({4, 4}), {X(4, l, m)}));
        break;
      case 3: {
        // literal row has x^2_m in the first factor product
        EntryKey second = opt.g3_pure == RowForm::derived ? X(1, m) : X(2, m);
        t.push_back(T(-1, CoefRef::V({1, 1, 1, 2}), {X(1, l), second, y5}));
        t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, l), X(1, m, 5)}));
        t.push_back(T(-1, CoefRef::V({1, 1, 1}), {X(1, m), X(1, l, 5)}));
        t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(2, m, 5)}));
        t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, m), X(2, l, 5)}));
        t.push_back(T(-1, CoefRef::V({1, 1, 2}), {y5, X(1, l, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 1}), {X(1, l), X(1, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 3}), {X(1, l), X(3, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 3}), {X(3, l), X(1, m)}));
        t.push_back(T(-1, CoefRef::F({1, 3, 3}), {X(3, l), X(3, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1}), {X(1, l, m)}));
        t.push_back(T(-1, CoefRef::F({1, 3}), {X(3, l, m)}));
        break;
      }
      case 4:
        t.push_back(T(-1, CoefRef::V({1, 1, 2, 2}), {X(1, l), X(1, m), y5}));
        t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, l), X(1, m, 5)}));
        t.push_back(T(-1, CoefRef::V({1, 1, 2}), {X(1, m), X(1, l, 5)}));
        t.push_back(T(-1, CoefRef::V({2, 2, 2}), {y5, X(2, l, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 2}), {X(1, l), X(1, m)}));
        t.push_back(T(-1, CoefRef::F({2, 3, 3}), {X(3, l), X(3, m)}));
        t.push_back(T(-1, CoefRef::F({1, 2, 3}), {X(1, l), X(3, m)}));
        t.push_back(T(-1, CoefRef::F({1, 2, 3}), {X(3, l), X(1, m)}));
        t.push_back(T(-1, CoefRef::F({2, 2}), {X(2, l, m)}));
        t.push_back(T(-1, CoefRef::F({2, 4}), {X(4, l, m)}));
        break;
    }
  } else if (s.a.size() == 1) {
    int l = s.a[0], m = s.b[0];
    switch (r) {
      case 1: {
        // literal row has x^3_m where the expansion gives x^2_m
        EntryKey f = opt.g1_mixed == RowForm::derived ? X(2, m) : X(3, m);
        t.push_back(T(1, CoefRef::F({2, 3, 3}), {X(3, l), f}));
        t.push_back(T(1, CoefRef::F({3, 3, 4}), {X(3, l), X(4, m)}));
        t.push_back(T(1, CoefRef::F({1, 2, 3}), {X(1, l), X(2, m)}));
        t.push_back(T(1, CoefRef::F({1, 3, 4}), {X(1, l), X(4, m)}));
        t.push_back(T(1, CoefRef::F({1, 3}), {X(1, l, m)}));
        t.push_back(T(1, CoefRef::F({3, 3}), {X(3, l, m)}));
        break;
      }
      case 3: {
        // literal row: V_122 on the bracket and + on the F_123, F_134 terms
        CoefRef bracket = opt.g3_mixed == RowForm::literal ? CoefRef::V({1, 2, 2})
                                                           : CoefRef::V({1, 1, 2});
        double sign = opt.g3_mixed == RowForm::derived ? -1.0 : 1.0;
        t.push_back(T(-1, CoefRef::V({1, 1, 2, 2}), {X(1, l), X(2, m), y5}));
        t.push_back(T(-1, bracket, {X(1, l), X(2, m, 5)}));
        t.push_back(T(-1, bracket, {X(2, m), X(1, l, 5)}));
        t.push_back(T(-1, bracket, {y5, X(1, l, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 2}), {X(1, l), X(2, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1, 4}), {X(1, l), X(4, m)}));
        t.push_back(T(sign, CoefRef::F({1, 2, 3}), {X(3, l), X(2, m)}));
        t.push_back(T(sign, CoefRef::F({1, 3, 4}), {X(3, l), X(4, m)}));
        t.push_back(T(-1, CoefRef::F({1, 1}), {X(1, l, m)}));
        t.push_back(T(-1, CoefRef::F({1, 3}), {X(3, l, m)}));
        break;
      }
      case 4:
        t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, m), X(2, l, 5)}));
        break;
      default: break;
    }
  } else {
    int l = s.b[0], m = s.b[1];
    if (r == 2) {
      t.push_back(T(1, CoefRef::F({2, 2, 4}), {X(2, l), X(2, m)}));
      t.push_back(T(1, CoefRef::F({2, 4, 4}), {X(2, l), X(4, m)}));
      t.push_back(T(1, CoefRef::F({2, 4, 4}), {X(4, l), X(2, m)}));
      t.push_back(T(1, CoefRef::F({4, 4, 4}), {X(4, l), X(4, m)}));
      t.push_back(T(1, CoefRef::F({2, 4}), {X(2, l, m)}));
      t.push_back(T(1, CoefRef::F({4, 4}), {X(4, l, m)}));
    } else if (r == 4) {
      t.push_back(T(-1, CoefRef::V({2, 2, 2, 2}), {X(2, l), X(2, m), y5}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, l), X(2, m, 5)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {X(2, m), X(2, l, 5)}));
      t.push_back(T(-1, CoefRef::V({2, 2, 2}), {y5, X(2, l, m)}));
      t.push_back(T(-1, CoefRef::F({2, 2, 2}), {X(2, l), X(2, m)}));
      t.push_back(T(-1, CoefRef::F({2, 2, 4}), {X(2, l), X(4, m)}));
      t.push_back(T(-1, CoefRef::F({2, 2, 4}), {X(4, l), X(2, m)}));
      t.push_back(T(-1, CoefRef::F({2, 4, 4}), {X(4, l), X(4, m)}));
      t.push_back(T(-1, CoefRef::F({2, 2}), {X(2, l, m)}));
      t.push_back(T(-1, CoefRef::F({2, 4}), {X(4, l, m)}));
    }
  }
  return g;
}

// D_J v^r for the vector field v = (px + d F_px, py + d F_py, -V_x - d F_x,
// -V_y - d F_y) in the variables (x, y, px, py, d), on the plane at d = 0.
std::optional<Term> field_tensor(const Model& model, int r, const std::vector<int>& J) {
  int n5 = static_cast<int>(std::count(J.begin(), J.end(), 5));
  if (n5 >= 2) return std::nullopt;
  std::array<std::uint8_t, kNumVars> c{};
  if (n5 == 1) {
    if (!model.deformed()) return std::nullopt;
    static constexpr int base[] = {0, 3, 4, 1, 2};
    ++c[static_cast<std::size_t>(base[r] - 1)];
    for (int j : J)
      if (j != 5) ++c[static_cast<std::size_t>(j - 1)];
    PartialIndex idx = PartialIndex::from_counts(c);
    if (model.deformation->partial(idx).is_zero()) return std::nullopt;
    return Term{r <= 2 ? 1.0 : -1.0, CoefRef{CoefRef::Field::deformation, idx}, {}};
  }
  if (r <= 2) return std::nullopt;  // linear in the momenta
  ++c[static_cast<std::size_t>(r - 3)];
  for (int j : J) ++c[static_cast<std::size_t>(j - 1)];
  PartialIndex idx = PartialIndex::from_counts(c);
  if (idx.order() > model.potential.max_order() || model.potential.partial(idx).is_zero())
    return std::nullopt;
  return Term{-1.0, CoefRef{CoefRef::Field::potential, idx}, {}};
}

bool coef_less(const CoefRef& a, const CoefRef& b) {
  if (a.field != b.field) return a.field < b.field;
  return a.index.counts() < b.index.counts();
}

}  // namespace

void check_integrated_pattern(const MultiIndex& idx) {
  if (idx.order() < 1 || idx.order() > 3)
    throw UnsupportedIndexError("flow derivative x_{" + idx.to_string() +
                                "}: only orders 1 to 3 are supported");
  if (idx.contains(0))
    throw UnsupportedIndexError("flow derivative x_{" + idx.to_string() +
                                "}: time indices are not integrated");
  if (idx.count(5) > 1)
    throw UnsupportedIndexError("flow derivative x_{" + idx.to_string() +
                                "}: at most one deformation index is supported");
}

Inhomogeneity case_row(int r, const MultiIndex& idx, const FormulaOptions& options) {
  check_integrated_pattern(idx);
  if (r < 1 || r > 4) throw std::invalid_argument("flow component outside 1..4");
  const bool d = idx.contains(5);
  const Split s = split(idx);
  switch (idx.order()) {
    case 1: {
      Inhomogeneity g;
      if (d && r == 2) g.terms.push_back(T(1, CoefRef::F({4}), {}));
      if (d && r == 4) g.terms.push_back(T(-1, CoefRef::F({2}), {}));
      return g;
    }
    case 2: return d ? row2_delta(r, idx[0]) : row2(r, s);
    default: return d ? row3_delta(r, s, options) : row3(r, s);
  }
}

Inhomogeneity expanded_inhomogeneity(const Model& model, int r, const MultiIndex& idx) {
  check_integrated_pattern(idx);
  if (r < 1 || r > 4) throw std::invalid_argument("flow component outside 1..4");
  const int n = idx.order();
  Inhomogeneity g;
  if (n == 1) {
    if (idx[0] == 5)
      if (auto t = field_tensor(model, r, {5})) g.terms.push_back(*t);
    return g;
  }
  // set partitions of the index positions into at least two blocks
  std::vector<std::vector<std::vector<int>>> partitions;
  if (n == 2) {
    partitions = {{{0}, {1}}};
  } else {
    partitions = {{{0}, {1}, {2}}, {{0, 1}, {2}}, {{0, 2}, {1}}, {{0}, {1, 2}}};
  }
  for (const auto& blocks : partitions) {
    const std::size_t k = blocks.size();
    std::vector<int> comp(k, 1);
    while (true) {
      Term term{1.0, CoefRef::one(), {}};
      bool vanishes = false;
      for (std::size_t b = 0; b < k && !vanishes; ++b) {
        MultiIndex sub;
        for (int pos : blocks[b]) sub = sub.with(idx[pos]);
        if (comp[b] == 5) {
          // x^5 is the deformation parameter itself
          if (!(sub.order() == 1 && sub[0] == 5)) vanishes = true;
        } else {
          term.factors.push_back({comp[b], sub});
        }
      }
      if (!vanishes) {
        if (auto c = field_tensor(model, r, comp)) {
          term.scale = c->scale;
          term.coef = c->coef;
          g.terms.push_back(std::move(term));
        }
      }
      std::size_t p = 0;
      while (p < k && comp[p] == 5) comp[p++] = 1;
      if (p == k) break;
      ++comp[p];
    }
  }
  return canonical(g);
}

Inhomogeneity canonical(const Inhomogeneity& g) {
  std::vector<Term> terms = g.terms;
  for (auto& t : terms) std::sort(t.factors.begin(), t.factors.end());
  auto less = [](const Term& a, const Term& b) {
    if (!(a.coef == b.coef)) return coef_less(a.coef, b.coef);
    return a.factors < b.factors;
  };
  std::sort(terms.begin(), terms.end(), less);
  Inhomogeneity out;
  for (auto& t : terms) {
    if (!out.terms.empty() && out.terms.back().coef == t.coef &&
        out.terms.back().factors == t.factors) {
      out.terms.back().scale += t.scale;
    } else {
      out.terms.push_back(std::move(t));
    }
  }
  std::erase_if(out.terms, [](const Term& t) { return t.scale == 0.0; });
  return out;
}

bool vanishes_on_plane(const Model& model, const CoefRef& coef) {
  const auto& c = coef.index.counts();
  switch (coef.field) {
    case CoefRef::Field::one: return false;
    case CoefRef::Field::potential:
      if (coef.index.order() > model.potential.max_order()) return false;
      return c[0] == 1 || model.potential.partial(coef.index).is_zero();
    case CoefRef::Field::deformation:
      if (!model.deformed()) return true;
      return c[0] + c[2] == 1 || model.deformation->partial(coef.index).is_zero();
  }
  return false;
}

// ---------------------------------------------------------------------------

FlowTables make_flow_tables(const TimeGrid& grid) {
  FlowTables t;
  t.grid_ = grid;
  t.one_ = FlowEntry{false, TimeFunction::composed(grid, [](double) { return 1.0; })};
  t.zero_ = FlowEntry{};
  return t;
}

const FlowEntry& FlowTables::entry(int r, const MultiIndex& idx) const {
  if (r < 1 || r > 5) throw UnsupportedIndexError("flow component outside 1..5");
  if (idx.order() < 1 || idx.count(5) > 1)
    throw UnsupportedIndexError("flow derivative x^" + std::to_string(r) + "_{" +
                                idx.to_string() + "} is outside the supported patterns");
  if (r == 5) return (idx.order() == 1 && idx[0] == 5) ? one_ : zero_;
  auto it = entries_.find(EntryKey{r, idx});
  if (it == entries_.end())
    throw std::out_of_range("flow derivative " + EntryKey{r, idx}.to_string() +
                            " was not computed");
  return it->second;
}

bool FlowTables::contains(int r, const MultiIndex& idx) const {
  if (r == 5) return true;
  return entries_.count(EntryKey{r, idx}) > 0;
}

const Inhomogeneity& FlowTables::inhomogeneity(int r, const MultiIndex& idx) const {
  static const Inhomogeneity empty;
  auto it = inhomogeneities_.find(EntryKey{r, idx});
  return it == inhomogeneities_.end() ? empty : it->second;
}

std::vector<EntryKey> FlowTables::keys() const {
  std::vector<EntryKey> out;
  out.reserve(entries_.size());
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

void FlowTables::set(const EntryKey& key, FlowEntry entry) { entries_[key] = std::move(entry); }

void FlowTables::set_inhomogeneity(const EntryKey& key, Inhomogeneity g) {
  inhomogeneities_[key] = std::move(g);
}

// ---------------------------------------------------------------------------

FlowPlanner::FlowPlanner(const Model& model, FormulaOptions options, Source source)
    : model_(model), options_(options), source_(source) {}

const Inhomogeneity& FlowPlanner::inhomogeneity(const EntryKey& key) {
  if (auto it = pruned_.find(key); it != pruned_.end()) return it->second;
  Inhomogeneity raw = source_ == Source::case_rows ? case_row(key.r, key.idx, options_)
                                                   : expanded_inhomogeneity(model_, key.r, key.idx);
  Inhomogeneity out;
  for (auto& t : raw.terms) {
    if (vanishes_on_plane(model_, t.coef)) continue;
    bool zero = false;
    for (const auto& f : t.factors) {
      if (is_zero(f)) {
        zero = true;
        break;
      }
    }
    if (!zero) out.terms.push_back(std::move(t));
  }
  return pruned_.emplace(key, std::move(out)).first->second;
}

bool FlowPlanner::is_zero(const EntryKey& key) {
  if (key.r == 5) return !(key.idx.order() == 1 && key.idx[0] == 5);
  check_integrated_pattern(key.idx);
  const Pair pair = pair_of(key.r);
  auto mk = std::make_pair(pair, key.idx);
  if (auto it = zero_.find(mk); it != zero_.end()) return it->second;
  bool zero;
  if (key.idx.order() == 1 && key.idx[0] != 5) {
    int a = key.idx[0];
    zero = !(a == top_component(pair) || a == bottom_component(pair));
  } else {
    zero = inhomogeneity({top_component(pair), key.idx}).is_zero() &&
           inhomogeneity({bottom_component(pair), key.idx}).is_zero();
  }
  zero_[mk] = zero;
  return zero;
}

void FlowPlanner::require(Pair pair, const MultiIndex& idx, VariationalPlan& plan,
                          std::vector<std::pair<Pair, MultiIndex>>& added) {
  auto mk = std::make_pair(pair, idx);
  if (std::find(added.begin(), added.end(), mk) != added.end()) return;
  const EntryKey top{top_component(pair), idx}, bot{bottom_component(pair), idx};
  if (is_zero(top)) return;
  Inhomogeneity gt = inhomogeneity(top);
  Inhomogeneity gb = inhomogeneity(bot);
  for (const auto* g : {&gt, &gb})
    for (const auto& t : g->terms)
      for (const auto& f : t.factors) require(pair_of(f.r), f.idx, plan, added);
  PairSystem sys{pair, idx, std::move(gt), std::move(gb), 0.0, 0.0};
  if (idx.order() == 1) {
    sys.init_top = idx[0] == top.r ? 1.0 : 0.0;
    sys.init_bottom = idx[0] == bot.r ? 1.0 : 0.0;
  }
  plan.add(std::move(sys));
  added.push_back(mk);
}

VariationalPlan FlowPlanner::plan(std::span<const EntryKey> targets) {
  VariationalPlan p(model_);
  std::vector<std::pair<Pair, MultiIndex>> added;
  for (const auto& k : targets) require(pair_of(k.r), k.idx, p, added);
  return p;
}

std::vector<EntryKey> integrated_keys(int max_order, bool deformation) {
  std::vector<EntryKey> out;
  const int top = deformation ? 5 : 4;
  auto emit = [&](const MultiIndex& m) {
    if (m.count(5) > 1) return;
    for (int r = 1; r <= 4; ++r) out.push_back({r, m});
  };
  for (int a = 1; a <= top; ++a) {
    if (max_order >= 1) emit(MultiIndex{a});
    for (int b = a; b <= top && max_order >= 2; ++b) {
      emit(MultiIndex{a, b});
      for (int c = b; c <= top && max_order >= 3; ++c) emit(MultiIndex{a, b, c});
    }
  }
  return out;
}

FlowTables build_flow_tables(const Model& model, const OrbitPrerequisites& orbit,
                             std::span<const EntryKey> targets, const FormulaOptions& options,
                             FlowPlanner::Source source) {
  FlowPlanner planner(model, options, source);
  VariationalPlan plan = planner.plan(targets);
  GridSolution sol = integrate_on_grid(plan, orbit.y_max, orbit.grid);
  FlowTables tables = make_flow_tables(orbit.grid);
  for (const auto& sys : plan.systems()) {
    for (int r : {top_component(sys.pair), bottom_component(sys.pair)}) {
      EntryKey k{r, sys.idx};
      tables.set(k, FlowEntry{false, sol.function(*plan.slot(k))});
      tables.set_inhomogeneity(k, r == top_component(sys.pair) ? sys.top : sys.bottom);
    }
  }
  for (const auto& k : targets)
    if (!tables.contains(k.r, k.idx)) tables.set(k, FlowEntry{});
  return tables;
}

FlowTables first_order_tables(const Model& model, const OrbitPrerequisites& orbit) {
  auto keys = integrated_keys(1, model.deformed());
  return build_flow_tables(model, orbit, keys);
}

FlowTables second_order_tables(const Model& model, const OrbitPrerequisites& orbit,
                               const FormulaOptions& options) {
  auto keys = integrated_keys(2, model.deformed());
  return build_flow_tables(model, orbit, keys, options);
}

FlowTables third_order_tables(const Model& model, const OrbitPrerequisites& orbit,
                              const FormulaOptions& options) {
  auto keys = integrated_keys(3, model.deformed());
  return build_flow_tables(model, orbit, keys, options);
}

// ---------------------------------------------------------------------------

namespace {

// Pointwise evaluation of coefficients along the orbit.
struct OrbitCoefs {
  std::shared_ptr<const Model> model;
  TimeFunction y, ydot;

  PhasePoint at(double t) const { return {0.0, y(t), 0.0, ydot(t)}; }
  double V(std::initializer_list<int> v, const PhasePoint& p) const {
    return model->potential.partial_value(field_index(v), p);
  }
  double F(std::initializer_list<int> v, const PhasePoint& p) const {
    return model->deformation ? model->deformation->partial_value(field_index(v), p) : 0.0;
  }
  double coef(const CoefRef& c, const PhasePoint& p) const {
    switch (c.field) {
      case CoefRef::Field::one: return 1.0;
      case CoefRef::Field::potential: return model->potential.partial_value(c.index, p);
      case CoefRef::Field::deformation:
        return model->deformation ? model->deformation->partial_value(c.index, p) : 0.0;
    }
    return 0.0;
  }
};

struct BoundTerm {
  double scale;
  CoefRef coef;
  std::vector<FlowEntry> factors;
};

std::vector<BoundTerm> bind(const FlowTables& tables, const Inhomogeneity& g) {
  std::vector<BoundTerm> out;
  for (const auto& t : g.terms) {
    BoundTerm b{t.scale, t.coef, {}};
    for (const auto& f : t.factors) b.factors.push_back(tables.entry(f));
    out.push_back(std::move(b));
  }
  return out;
}

double eval_bound(const OrbitCoefs& oc, const std::vector<BoundTerm>& terms, double t,
                  const PhasePoint& p) {
  double s = 0.0;
  for (const auto& b : terms) {
    double v = b.scale * oc.coef(b.coef, p);
    for (const auto& f : b.factors) v *= f(t);
    s += v;
  }
  return s;
}

}  // namespace

FlowEntry inhomogeneity_function(const FlowTables& tables, const Model& model,
                                 const OrbitPrerequisites& orbit, const Inhomogeneity& g) {
  if (g.is_zero()) return FlowEntry{};
  OrbitCoefs oc{std::make_shared<const Model>(model), orbit.y, orbit.ydot};
  auto terms = bind(tables, g);
  return FlowEntry{false, TimeFunction::composed(tables.grid(), [oc, terms](double t) {
                     return eval_bound(oc, terms, t, oc.at(t));
                   })};
}

void add_time_index_entries(FlowTables& tables, const Model& model,
                            const OrbitPrerequisites& orbit) {
  const OrbitCoefs oc{std::make_shared<const Model>(model), orbit.y, orbit.ydot};
  const TimeGrid& grid = tables.grid();
  auto put = [&](int r, const MultiIndex& idx, std::function<double(double)> rule) {
    tables.set({r, idx}, FlowEntry{false, TimeFunction::composed(grid, std::move(rule))});
  };
  auto zero = [&](int r, const MultiIndex& idx) { tables.set({r, idx}, FlowEntry{}); };

  // x_0, x_00, x_000
  for (int r : {1, 3}) {
    zero(r, MultiIndex{0});
    zero(r, MultiIndex{0, 0});
    zero(r, MultiIndex{0, 0, 0});
  }
  put(2, MultiIndex{0}, [oc](double t) { return oc.ydot(t); });
  put(4, MultiIndex{0}, [oc](double t) { return -oc.V({2}, oc.at(t)); });
  put(2, MultiIndex{0, 0}, [oc](double t) { return -oc.V({2}, oc.at(t)); });
  put(4, MultiIndex{0, 0}, [oc](double t) {
    auto p = oc.at(t);
    return -oc.V({2, 2}, p) * p[3];
  });
  put(2, MultiIndex{0, 0, 0}, [oc](double t) {
    auto p = oc.at(t);
    return -oc.V({2, 2}, p) * p[3];
  });
  put(4, MultiIndex{0, 0, 0}, [oc](double t) {
    auto p = oc.at(t);
    return -oc.V({2, 2, 2}, p) * p[3] * p[3] + oc.V({2}, p) * oc.V({2, 2}, p);
  });

  // x_0J = (pair right-hand side) for every integrated J of order 1 or 2
  std::vector<EntryKey> integrated;
  for (const auto& k : tables.keys())
    if (!k.idx.contains(0) && k.idx.order() <= 2) integrated.push_back(k);
  for (const auto& k : integrated) {
    const Pair pair = pair_of(k.r);
    const int top = top_component(pair), bot = bottom_component(pair);
    const MultiIndex idx0 = k.idx.with(0);
    if (k.r == top) {
      if (!tables.contains(bot, k.idx)) continue;
      FlowEntry partner = tables.entry(bot, k.idx);
      auto g = bind(tables, tables.inhomogeneity(k.r, k.idx));
      if (partner.zero && g.empty()) {
        zero(k.r, idx0);
        continue;
      }
      put(k.r, idx0, [oc, partner, g](double t) {
        return partner(t) + eval_bound(oc, g, t, oc.at(t));
      });
    } else {
      if (!tables.contains(top, k.idx)) continue;
      FlowEntry partner = tables.entry(top, k.idx);
      auto g = bind(tables, tables.inhomogeneity(k.r, k.idx));
      if (partner.zero && g.empty()) {
        zero(k.r, idx0);
        continue;
      }
      put(k.r, idx0, [oc, partner, g, top](double t) {
        auto p = oc.at(t);
        double v = top == 1 ? oc.V({1, 1}, p) : oc.V({2, 2}, p);
        return -v * partner(t) + eval_bound(oc, g, t, p);
      });
    }
  }

  // x_00l for l in 1..5
  for (int l = 1; l <= 5; ++l) {
    const MultiIndex L{l}, L00{0, 0, l};
    if (!tables.contains(1, L) || !tables.contains(2, L)) continue;
    const FlowEntry x1 = tables.entry(1, L), x2 = tables.entry(2, L), x3 = tables.entry(3, L),
                    x4 = tables.entry(4, L);
    const bool d = l == 5;
    if (x1.zero) {
      zero(1, L00);
    } else {
      put(1, L00, [oc, x1](double t) { return -oc.V({1, 1}, oc.at(t)) * x1(t); });
    }
    if (x1.zero && x3.zero) {
      zero(3, L00);
    } else {
      put(3, L00, [oc, x1, x3](double t) {
        auto p = oc.at(t);
        return -oc.V({1, 1, 2}, p) * p[3] * x1(t) - oc.V({1, 1}, p) * x3(t);
      });
    }
    if (x2.zero && !(d && model.deformed())) {
      zero(2, L00);
    } else {
      put(2, L00, [oc, x2, d](double t) {
        auto p = oc.at(t);
        double v = -oc.V({2, 2}, p) * x2(t);
        if (d) v += -oc.F({2}, p) + oc.F({2, 4}, p) * p[3] - oc.F({4, 4}, p) * oc.V({2}, p);
        return v;
      });
    }
    if (x2.zero && x4.zero && !(d && model.deformed())) {
      zero(4, L00);
    } else {
      put(4, L00, [oc, x2, x4, d](double t) {
        auto p = oc.at(t);
        double x20 = x4(t) + (d ? oc.F({4}, p) : 0.0);
        double v = -oc.V({2, 2, 2}, p) * p[3] * x2(t) - oc.V({2, 2}, p) * x20;
        if (d) v += -oc.F({2, 2}, p) * p[3] + oc.F({2, 4}, p) * oc.V({2}, p);
        return v;
      });
    }
  }
}

// ---------------------------------------------------------------------------

std::pair<FlowEntry, FlowEntry> solve_inhomogeneous(Pair pair, const FlowEntry& g_top,
                                                    const FlowEntry& g_bot, const Model& model,
                                                    const OrbitPrerequisites& orbit) {
  if (g_top.zero && g_bot.zero) return {FlowEntry{}, FlowEntry{}};
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  const auto& v2 = model.potential.compiled({Var::y});
  const auto& vrr = pair == Pair::p13 ? model.potential.compiled({Var::x, Var::x})
                                      : model.potential.compiled({Var::y, Var::y});
  auto rhs = [&](const State& s, State& ds, double t) {
    const PhasePoint p{0.0, s[0], 0.0, s[1]};
    ds[0] = s[1];
    ds[1] = -v2(p);
    ds[2] = s[3] + g_top(t);
    ds[3] = -vrr(p) * s[2] + g_bot(t);
  };
  const TimeGrid& grid = orbit.grid;
  const std::size_t n = grid.size();
  std::vector<double> top(n), bot(n), dtop(n), dbot(n);
  odeint::runge_kutta_fehlberg78<State> stepper;
  State s{orbit.y_max, 0.0, 0.0, 0.0}, ds(4);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) stepper.do_step(rhs, s, grid[i - 1], grid[i] - grid[i - 1]);
    rhs(s, ds, grid[i]);
    top[i] = s[2];
    bot[i] = s[3];
    dtop[i] = ds[2];
    dbot[i] = ds[3];
  }
  return {FlowEntry{false, TimeFunction::hermite(grid, std::move(top), std::move(dtop))},
          FlowEntry{false, TimeFunction::hermite(grid, std::move(bot), std::move(dbot))}};
}

void write_flow_tables_csv(const FlowTables& tables, std::ostream& out) {
  std::vector<std::pair<EntryKey, const FlowEntry*>> cols;
  for (const auto& k : tables.keys()) {
    const FlowEntry& e = tables.entry(k);
    if (!e.zero) cols.emplace_back(k, &e);
  }
  out << "t";
  for (const auto& [k, e] : cols) out << ',' << k.to_string();
  out << '\n';
  out.precision(17);
  const TimeGrid& grid = tables.grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << grid[i];
    for (const auto& [k, e] : cols) out << ',' << e->node_value(i);
    out << '\n';
  }
}

}  // namespace libration
