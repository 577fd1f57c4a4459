#include "libration/symexpr.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace libration {

PartialIndex::PartialIndex(std::initializer_list<Var> vars)
    : PartialIndex(std::span<const Var>(vars.begin(), vars.size())) {}

PartialIndex::PartialIndex(std::span<const Var> vars) {
  for (Var v : vars) ++counts_[static_cast<std::size_t>(v)];
}

PartialIndex PartialIndex::from_counts(std::array<std::uint8_t, kNumVars> counts) {
  PartialIndex p;
  p.counts_ = counts;
  return p;
}

int PartialIndex::order() const {
  int n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::string PartialIndex::to_string() const {
  std::string out;
  for (std::size_t v = 0; v < kNumVars; ++v) {
    for (int k = 0; k < counts_[v]; ++k) {
      if (!out.empty()) out += ',';
      out += var_name(static_cast<Var>(v));
    }
  }
  return out;
}

namespace {

constexpr std::size_t kBase = 5;  // counts per variable are 0..4
constexpr std::size_t kSlots = kBase * kBase * kBase * kBase;

std::size_t token_position(std::string_view source, std::string_view token) {
  std::size_t i = 0;
  while (i < source.size()) {
    if (std::isalpha(static_cast<unsigned char>(source[i])) || source[i] == '_') {
      std::size_t start = i;
      while (i < source.size() &&
             (std::isalnum(static_cast<unsigned char>(source[i])) || source[i] == '_'))
        ++i;
      if (source.substr(start, i - start) == token) return start;
    } else {
      ++i;
    }
  }
  return 0;
}

}  // namespace

std::size_t SymbolicField::slot(const PartialIndex& index) {
  const auto& c = index.counts();
  std::size_t s = 0;
  for (std::size_t v = kNumVars; v-- > 0;) s = s * kBase + c[v];
  return s;
}

SymbolicField::SymbolicField(Expression base, FieldKind kind) : kind_(kind) {
  source_ = base.to_string();
  auto entries = std::make_shared<std::vector<Entry>>(kSlots);
  const int max = max_order();

  // Each partial is derived from the index with its first nonzero count
  // lowered by one, so every index has exactly one derivation path and the
  // stored trees for permuted multi-indices are the same object.
  Expression root = base.folded();
  (*entries)[0] = Entry{root, CompiledExpr(root), true};
  for (int order = 1; order <= max; ++order) {
    for (std::size_t s = 0; s < kSlots; ++s) {
      std::array<std::uint8_t, kNumVars> c{};
      std::size_t r = s;
      int total = 0;
      for (std::size_t v = 0; v < kNumVars; ++v) {
        c[v] = static_cast<std::uint8_t>(r % kBase);
        r /= kBase;
        total += c[v];
      }
      if (total != order) continue;
      std::size_t first = 0;
      while (c[first] == 0) ++first;
      auto parent = c;
      --parent[first];
      const Entry& pe = (*entries)[slot(PartialIndex::from_counts(parent))];
      Expression d = pe.expr.derivative(static_cast<Var>(first));
      (*entries)[s] = Entry{d, CompiledExpr(d), true};
    }
  }
  entries_ = std::move(entries);
}

SymbolicField SymbolicField::parse(std::string_view source, FieldKind kind) {
  Expression e = parse_expression(source);
  if (kind == FieldKind::potential) {
    for (Var v : {Var::px, Var::py}) {
      if (e.depends_on(v)) {
        std::size_t pos = token_position(source, var_name(v));
        throw ParseError(ParseError::Kind::forbidden_variable, pos,
                         "at " + std::to_string(pos) + ": '" + var_name(v) +
                             "' is not allowed in a potential V(x, y)");
      }
    }
  }
  SymbolicField f(e, kind);
  f.source_ = std::string(source);
  return f;
}

const Expression& SymbolicField::partial(const PartialIndex& index) const {
  if (index.order() > max_order())
    throw std::out_of_range("partial derivative of order " + std::to_string(index.order()) +
                            " exceeds the supported maximum " + std::to_string(max_order()));
  return (*entries_)[slot(index)].expr;
}

const CompiledExpr& SymbolicField::compiled(const PartialIndex& index) const {
  if (index.order() > max_order())
    throw std::out_of_range("partial derivative of order " + std::to_string(index.order()) +
                            " exceeds the supported maximum " + std::to_string(max_order()));
  return (*entries_)[slot(index)].code;
}

HypothesisReport check_hypotheses(const SymbolicField& potential,
                                  const SymbolicField* deformation,
                                  std::span<const double> probe_ys,
                                  std::span<const double> probe_pys, double tolerance) {
  HypothesisReport rep;
  const auto& vx = potential.compiled({Var::x});
  std::size_t skipped = 0;
  double worst = 0.0;
  for (double y : probe_ys) {
    double v = vx({0.0, y, 0.0, 0.0});
    ++rep.probes;
    if (!std::isfinite(v)) {
      ++skipped;
      continue;
    }
    if (std::abs(v) > rep.potential_violation) {
      rep.potential_violation = std::abs(v);
      if (rep.potential_violation > worst) {
        worst = rep.potential_violation;
        rep.worst_y = y;
      }
    }
  }
  if (deformation) {
    const auto& fx = deformation->compiled({Var::x});
    const auto& fpx = deformation->compiled({Var::px});
    for (double y : probe_ys) {
      for (double py : probe_pys) {
        PhasePoint pt{0.0, y, 0.0, py};
        double a = fx(pt);
        double b = fpx(pt);
        ++rep.probes;
        if (!std::isfinite(a) || !std::isfinite(b)) {
          ++skipped;
          continue;
        }
        double m = std::max(std::abs(a), std::abs(b));
        if (m > rep.deformation_violation) {
          rep.deformation_violation = m;
          if (m > worst) {
            worst = m;
            rep.worst_y = y;
          }
        }
      }
    }
  }
  rep.passed = rep.potential_violation <= tolerance && rep.deformation_violation <= tolerance;
  std::ostringstream os;
  os.precision(6);
  if (rep.passed) {
    os << "invariant plane x = px = 0 preserved at " << rep.probes << " probes";
  } else {
    os << "invariant plane x = px = 0 not preserved: max |V_x(0,y)| = " << rep.potential_violation;
    if (deformation) os << ", max |F_x|,|F_px| = " << rep.deformation_violation;
    os << " (worst at y = " << rep.worst_y << ", tolerance " << tolerance << ")";
  }
  if (skipped) os << "; " << skipped << " probes evaluated to non-finite values and were skipped";
  rep.message = os.str();
  return rep;
}

std::vector<double> default_probe_ys(double lo, double hi) {
  if (hi < lo) std::swap(lo, hi);
  std::vector<double> ys;
  const int n = 33;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int k = 0; k < n; ++k)
    ys.push_back(mid + half * std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * n)));
  const double margin = 0.1 * std::max(hi - lo, 1e-3);
  for (int k = 1; k <= 10; ++k) {
    ys.push_back(lo - margin * k / 10.0);
    ys.push_back(hi + margin * k / 10.0);
  }
  return ys;
}

}  // namespace libration
