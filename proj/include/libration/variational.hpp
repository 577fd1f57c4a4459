#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "libration/symexpr.hpp"
#include "libration/timefn.hpp"

namespace libration {

/// Potential V(x, y) and optional deformation F(x, y, px, py).
struct Model {
  SymbolicField potential;
  std::optional<SymbolicField> deformation;

  bool deformed() const { return deformation.has_value(); }
};

/// Sorted multi-index of 0 to 3 flow arguments a^0..a^5
/// (0 = t, 1 = x, 2 = y, 3 = px, 4 = py, 5 = delta).
class MultiIndex {
 public:
  constexpr MultiIndex() = default;
  MultiIndex(std::initializer_list<int> indices);

  int order() const { return n_; }
  int operator[](int k) const { return v_[static_cast<std::size_t>(k)]; }
  int count(int a) const;
  bool contains(int a) const { return count(a) > 0; }
  MultiIndex with(int a) const;     // appends and re-sorts
  MultiIndex without(int a) const;  // removes one occurrence
  std::string to_string() const;    // "113", "" for order 0

  auto operator<=>(const MultiIndex&) const = default;

 private:
  std::array<std::uint8_t, 3> v_{};
  std::uint8_t n_ = 0;
};

/// Flow component r (1..4) differentiated by a multi-index.
struct EntryKey {
  int r = 1;
  MultiIndex idx;

  auto operator<=>(const EntryKey&) const = default;
  std::string to_string() const;  // "x^3_{113}"
};

/// PartialIndex from flow-variable numbers 1..4 (x, y, px, py).
PartialIndex field_index(std::initializer_list<int> vars);
PartialIndex field_index(const MultiIndex& vars);

/// Coefficient of an inhomogeneity term, evaluated along the orbit at
/// (x, y, px, py) = (0, y(t), 0, y'(t)).
struct CoefRef {
  enum class Field : std::uint8_t { one, potential, deformation };
  Field field = Field::one;
  PartialIndex index;

  static CoefRef one() { return {}; }
  static CoefRef V(std::initializer_list<int> vars) { return {Field::potential, field_index(vars)}; }
  static CoefRef F(std::initializer_list<int> vars) { return {Field::deformation, field_index(vars)}; }

  std::string to_string() const;  // "V_112", "F_24", "1"
  friend bool operator==(const CoefRef&, const CoefRef&) = default;
};

/// scale * coef(t) * product of flow-derivative factors.
struct Term {
  double scale = 1.0;
  CoefRef coef;
  std::vector<EntryKey> factors;
};

/// Sum of terms; an empty sum is the structural zero.
struct Inhomogeneity {
  std::vector<Term> terms;

  bool is_zero() const { return terms.empty(); }
  std::string to_string() const;
};

/// The two coupled blocks of the linearized flow: (x^1, x^3) driven by
/// -V_11 and (x^2, x^4) driven by -V_22.
enum class Pair : std::uint8_t { p13, p24 };

inline int top_component(Pair p) { return p == Pair::p13 ? 1 : 2; }
inline int bottom_component(Pair p) { return p == Pair::p13 ? 3 : 4; }

/// x_top' = x_bot + g_top, x_bot' = -V_rr x_top + g_bot with given initial data.
struct PairSystem {
  Pair pair = Pair::p13;
  MultiIndex idx;
  Inhomogeneity top, bottom;
  double init_top = 0.0;
  double init_bottom = 0.0;
};

/// The orbit (y, y') augmented by a dependency-ordered list of pair systems,
/// integrated as one ODE. Component-wise arithmetic keeps each slot's values
/// identical regardless of which other systems share the integration.
class VariationalPlan {
 public:
  explicit VariationalPlan(Model model);

  /// Every factor of the system's terms must be produced by an earlier system.
  void add(PairSystem system);

  std::size_t dimension() const { return 2 + 2 * systems_.size(); }
  std::optional<std::size_t> slot(const EntryKey& key) const;
  const std::vector<PairSystem>& systems() const { return systems_; }
  const Model& model() const { return model_; }

  std::vector<double> initial_state(double y0) const;
  void rhs(const std::vector<double>& s, std::vector<double>& ds) const;

 private:
  struct CompiledTerm {
    double scale;
    int coef;  // -1 for the constant one
    std::uint8_t nfactors;
    std::array<std::uint32_t, 3> factors;
  };
  struct CompiledSystem {
    std::size_t top_slot;
    bool p13;
    std::uint32_t top_begin, top_end, bot_begin, bot_end;
  };

  int coef_id(const CoefRef& c);
  void compile_terms(const Inhomogeneity& g);

  Model model_;
  std::vector<PairSystem> systems_;
  std::vector<std::pair<EntryKey, std::size_t>> slots_;
  std::vector<CoefRef> coef_refs_;
  std::vector<const CompiledExpr*> coefs_;
  std::vector<CompiledTerm> terms_;
  std::vector<CompiledSystem> compiled_;
};

/// Node values and slopes for every slot of a plan on a grid.
struct GridSolution {
  TimeGrid grid;
  std::vector<std::vector<double>> values;  // [slot][node]
  std::vector<std::vector<double>> slopes;

  TimeFunction function(std::size_t slot) const;
  double end_value(std::size_t slot) const { return values[slot].back(); }
};

/// Fixed-step 7(8) Runge-Kutta-Fehlberg integration node to node, starting
/// from (y, y') = (y0, 0).
GridSolution integrate_on_grid(const VariationalPlan& plan, double y0, const TimeGrid& grid);

/// Orbit only: final (y, y') after integrating over the grid.
std::array<double, 2> orbit_end_state(const Model& model, double y0, const TimeGrid& grid);

/// Coefficient value at an orbit point.
double coef_value(const Model& model, const CoefRef& c, double y, double ydot);

}  // namespace libration
