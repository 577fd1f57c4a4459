#include "libration/variational.hpp"

#include <algorithm>
#include <cmath>
#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>
#include <stdexcept>

namespace libration {

MultiIndex::MultiIndex(std::initializer_list<int> indices) {
  if (indices.size() > 3) throw std::invalid_argument("multi-index order above 3");
  for (int a : indices) {
    if (a < 0 || a > 5) throw std::invalid_argument("multi-index entry outside 0..5");
    v_[n_++] = static_cast<std::uint8_t>(a);
  }
  std::sort(v_.begin(), v_.begin() + n_);
}

int MultiIndex::count(int a) const {
  int c = 0;
  for (int k = 0; k < n_; ++k) c += v_[static_cast<std::size_t>(k)] == a;
  return c;
}

MultiIndex MultiIndex::with(int a) const {
  if (n_ == 3) throw std::invalid_argument("multi-index order above 3");
  MultiIndex m = *this;
  m.v_[m.n_++] = static_cast<std::uint8_t>(a);
  std::sort(m.v_.begin(), m.v_.begin() + m.n_);
  return m;
}

MultiIndex MultiIndex::without(int a) const {
  MultiIndex m;
  bool removed = false;
  for (int k = 0; k < n_; ++k) {
    int x = v_[static_cast<std::size_t>(k)];
    if (!removed && x == a) {
      removed = true;
      continue;
    }
    m.v_[m.n_++] = static_cast<std::uint8_t>(x);
  }
  if (!removed) throw std::invalid_argument("index not present in multi-index");
  return m;
}

std::string MultiIndex::to_string() const {
  std::string s;
  for (int k = 0; k < n_; ++k) s += static_cast<char>('0' + v_[static_cast<std::size_t>(k)]);
  return s;
}

std::string EntryKey::to_string() const {
  return "x^" + std::to_string(r) + "_{" + idx.to_string() + "}";
}

PartialIndex field_index(std::initializer_list<int> vars) {
  std::array<std::uint8_t, kNumVars> c{};
  for (int v : vars) {
    if (v < 1 || v > 4) throw std::invalid_argument("field variable outside 1..4");
    ++c[static_cast<std::size_t>(v - 1)];
  }
  return PartialIndex::from_counts(c);
}

PartialIndex field_index(const MultiIndex& vars) {
  std::array<std::uint8_t, kNumVars> c{};
  for (int k = 0; k < vars.order(); ++k) {
    int v = vars[k];
    if (v < 1 || v > 4) throw std::invalid_argument("field variable outside 1..4");
    ++c[static_cast<std::size_t>(v - 1)];
  }
  return PartialIndex::from_counts(c);
}

std::string CoefRef::to_string() const {
  if (field == Field::one) return "1";
  std::string s = field == Field::potential ? "V_" : "F_";
  for (std::size_t v = 0; v < kNumVars; ++v)
    for (int k = 0; k < index.counts()[v]; ++k) s += static_cast<char>('1' + v);
  return s;
}

std::string Inhomogeneity::to_string() const {
  if (terms.empty()) return "0";
  std::string s;
  for (const auto& t : terms) {
    if (!s.empty()) s += " ";
    s += t.scale < 0 ? "- " : (s.empty() ? "" : "+ ");
    double a = std::abs(t.scale);
    if (a != 1.0) s += std::to_string(a) + "*";
    s += t.coef.to_string();
    for (const auto& f : t.factors) s += "*" + f.to_string();
  }
  return s;
}

// ---------------------------------------------------------------------------

VariationalPlan::VariationalPlan(Model model) : model_(std::move(model)) {
  coef_id(CoefRef::V({2}));
  coef_id(CoefRef::V({1, 1}));
  coef_id(CoefRef::V({2, 2}));
}

int VariationalPlan::coef_id(const CoefRef& c) {
  if (c.field == CoefRef::Field::one) return -1;
  for (std::size_t k = 0; k < coef_refs_.size(); ++k)
    if (coef_refs_[k] == c) return static_cast<int>(k);
  const SymbolicField* f = nullptr;
  if (c.field == CoefRef::Field::potential) {
    f = &model_.potential;
  } else {
    if (!model_.deformation)
      throw std::logic_error("deformation coefficient " + c.to_string() + " in an undeformed model");
    f = &*model_.deformation;
  }
  coef_refs_.push_back(c);
  coefs_.push_back(&f->compiled(c.index));
  return static_cast<int>(coef_refs_.size() - 1);
}

std::optional<std::size_t> VariationalPlan::slot(const EntryKey& key) const {
  for (const auto& [k, s] : slots_)
    if (k == key) return s;
  return std::nullopt;
}

void VariationalPlan::compile_terms(const Inhomogeneity& g) {
  for (const auto& t : g.terms) {
    CompiledTerm ct{t.scale, coef_id(t.coef), static_cast<std::uint8_t>(t.factors.size()), {}};
    if (t.factors.size() > 3) throw std::logic_error("inhomogeneity term with more than 3 factors");
    for (std::size_t k = 0; k < t.factors.size(); ++k) {
      auto s = slot(t.factors[k]);
      if (!s)
        throw std::logic_error("inhomogeneity factor " + t.factors[k].to_string() +
                               " is not produced by an earlier system");
      ct.factors[k] = static_cast<std::uint32_t>(*s);
    }
    terms_.push_back(ct);
  }
}

void VariationalPlan::add(PairSystem system) {
  CompiledSystem cs{};
  cs.top_slot = dimension();
  cs.p13 = system.pair == Pair::p13;
  cs.top_begin = static_cast<std::uint32_t>(terms_.size());
  compile_terms(system.top);
  cs.top_end = cs.bot_begin = static_cast<std::uint32_t>(terms_.size());
  compile_terms(system.bottom);
  cs.bot_end = static_cast<std::uint32_t>(terms_.size());
  slots_.emplace_back(EntryKey{top_component(system.pair), system.idx}, cs.top_slot);
  slots_.emplace_back(EntryKey{bottom_component(system.pair), system.idx}, cs.top_slot + 1);
  compiled_.push_back(cs);
  systems_.push_back(std::move(system));
}

std::vector<double> VariationalPlan::initial_state(double y0) const {
  std::vector<double> s(dimension(), 0.0);
  s[0] = y0;
  for (std::size_t k = 0; k < systems_.size(); ++k) {
    s[compiled_[k].top_slot] = systems_[k].init_top;
    s[compiled_[k].top_slot + 1] = systems_[k].init_bottom;
  }
  return s;
}

void VariationalPlan::rhs(const std::vector<double>& s, std::vector<double>& ds) const {
  const PhasePoint p{0.0, s[0], 0.0, s[1]};
  double c_inline[64];
  std::vector<double> c_heap;
  double* c = c_inline;
  if (coefs_.size() > 64) {
    c_heap.resize(coefs_.size());
    c = c_heap.data();
  }
  for (std::size_t k = 0; k < coefs_.size(); ++k) c[k] = (*coefs_[k])(p);
  const double v2 = c[0], v11 = c[1], v22 = c[2];
  ds[0] = s[1];
  ds[1] = -v2;
  auto sum = [&](std::uint32_t b, std::uint32_t e) {
    double g = 0.0;
    for (std::uint32_t k = b; k < e; ++k) {
      const CompiledTerm& t = terms_[k];
      double v = t.scale;
      if (t.coef >= 0) v *= c[t.coef];
      for (std::uint8_t f = 0; f < t.nfactors; ++f) v *= s[t.factors[f]];
      g += v;
    }
    return g;
  };
  for (const auto& cs : compiled_) {
    const double top = s[cs.top_slot];
    const double bot = s[cs.top_slot + 1];
    ds[cs.top_slot] = bot + sum(cs.top_begin, cs.top_end);
    ds[cs.top_slot + 1] = -(cs.p13 ? v11 : v22) * top + sum(cs.bot_begin, cs.bot_end);
  }
}

TimeFunction GridSolution::function(std::size_t slot) const {
  return TimeFunction::hermite(grid, values[slot], slopes[slot]);
}

GridSolution integrate_on_grid(const VariationalPlan& plan, double y0, const TimeGrid& grid) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  odeint::runge_kutta_fehlberg78<State> stepper;
  auto sys = [&plan](const State& x, State& dx, double) { plan.rhs(x, dx); };

  const std::size_t dim = plan.dimension();
  const std::size_t n = grid.size();
  GridSolution sol;
  sol.grid = grid;
  sol.values.assign(dim, std::vector<double>(n));
  sol.slopes.assign(dim, std::vector<double>(n));

  State x = plan.initial_state(y0);
  State dx(dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) stepper.do_step(sys, x, grid[i - 1], grid[i] - grid[i - 1]);
    plan.rhs(x, dx);
    for (std::size_t k = 0; k < dim; ++k) {
      sol.values[k][i] = x[k];
      sol.slopes[k][i] = dx[k];
    }
  }
  return sol;
}

std::array<double, 2> orbit_end_state(const Model& model, double y0, const TimeGrid& grid) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  VariationalPlan plan(model);
  odeint::runge_kutta_fehlberg78<State> stepper;
  auto sys = [&plan](const State& x, State& dx, double) { plan.rhs(x, dx); };
  State x = plan.initial_state(y0);
  for (std::size_t i = 1; i < grid.size(); ++i)
    stepper.do_step(sys, x, grid[i - 1], grid[i] - grid[i - 1]);
  return {x[0], x[1]};
}

double coef_value(const Model& model, const CoefRef& c, double y, double ydot) {
  const PhasePoint p{0.0, y, 0.0, ydot};
  switch (c.field) {
    case CoefRef::Field::one: return 1.0;
    case CoefRef::Field::potential: return model.potential.partial_value(c.index, p);
    case CoefRef::Field::deformation:
      return model.deformation ? model.deformation->partial_value(c.index, p) : 0.0;
  }
  return 0.0;
}

}  // namespace libration
