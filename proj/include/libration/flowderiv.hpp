#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "libration/prereq.hpp"

namespace libration {

/// Selects between the literal form of a listed formula and its direct expansion
/// where the two differ. `symmetric` replaces only the coefficient or factor
/// that breaks the pattern of the neighbouring rows; rows without such a
/// variant treat it like `literal`.
enum class RowForm : std::uint8_t { derived, literal, symmetric };

const char* to_string(RowForm form);
RowForm parse_row_form(std::string_view text);  // throws std::invalid_argument

struct FormulaOptions {
  // Inhomogeneities with one deformation index.
  RowForm g1_mixed = RowForm::derived;   // g^1_{l m 5}, l in {1,3}, m in {2,4}
  RowForm g3_pure = RowForm::derived;    // g^3_{l m 5}, l, m in {1,3}
  RowForm g3_mixed = RowForm::derived;   // g^3_{l m 5}, l in {1,3}, m in {2,4}
  // Chain-rule listings.
  RowForm third_order = RowForm::derived;  // Q_qpp, P_qpp
  RowForm delta_third = RowForm::derived;  // Q_qpd, P_qqd, P_qpd, P_ppd

  static FormulaOptions all(RowForm form) { return {form, form, form, form, form}; }
};

/// One flow-derivative table entry: a function on [0, T] or a structural zero.
struct FlowEntry {
  bool zero = true;
  TimeFunction fn;

  double operator()(double t) const { return zero ? 0.0 : fn(t); }
  double at_end() const { return zero ? 0.0 : fn.at_end(); }
  double node_value(std::size_t i) const { return zero ? 0.0 : fn.node_value(i); }
};

/// Map (r, multi-index) -> FlowEntry on one orbit's grid. The bookkeeping
/// component x^5 is implicit: x^5_5 = 1 and every other x^5 entry is zero.
class FlowTables {
 public:
  /// Throws UnsupportedIndexError for patterns outside the supported set and
  /// std::out_of_range for supported entries that were not built.
  const FlowEntry& entry(int r, const MultiIndex& idx) const;
  const FlowEntry& entry(const EntryKey& key) const { return entry(key.r, key.idx); }
  double at_end(int r, const MultiIndex& idx) const { return entry(r, idx).at_end(); }
  bool contains(int r, const MultiIndex& idx) const;
  bool is_zero(int r, const MultiIndex& idx) const { return entry(r, idx).zero; }

  /// Inhomogeneity used for an integrated entry (empty for the zero ones).
  const Inhomogeneity& inhomogeneity(int r, const MultiIndex& idx) const;

  std::vector<EntryKey> keys() const;
  const TimeGrid& grid() const { return grid_; }
  double period() const { return grid_.back(); }

  void set(const EntryKey& key, FlowEntry entry);
  void set_inhomogeneity(const EntryKey& key, Inhomogeneity g);

 private:
  TimeGrid grid_;
  std::map<EntryKey, FlowEntry> entries_;
  std::map<EntryKey, Inhomogeneity> inhomogeneities_;
  FlowEntry one_, zero_;

  friend FlowTables make_flow_tables(const TimeGrid& grid);
};

FlowTables make_flow_tables(const TimeGrid& grid);

/// Throws UnsupportedIndexError unless idx is an integrated pattern:
/// order 1 to 3, entries in 1..5, at most one 5.
void check_integrated_pattern(const MultiIndex& idx);

/// Case tables for g^r_idx, with the FormulaOptions variants. Terms
/// are kept as written, including factors that are structurally zero.
Inhomogeneity case_row(int r, const MultiIndex& idx, const FormulaOptions& options = {});

/// Direct expansion of g^r_idx from the derivative tensor of the Hamiltonian
/// vector field, summed over set partitions of idx. Only coefficients that
/// are identically zero as expressions are dropped.
Inhomogeneity expanded_inhomogeneity(const Model& model, int r, const MultiIndex& idx);

/// Sorted terms with equal (coefficient, factors) merged.
Inhomogeneity canonical(const Inhomogeneity& g);

/// True when a coefficient vanishes on the plane x = px = 0: identically
/// zero expressions, V partials with exactly one x and F partials with
/// exactly one of x, px, and any F partial in an undeformed model.
bool vanishes_on_plane(const Model& model, const CoefRef& coef);

/// Decides structural zeros and builds dependency-ordered plans.
class FlowPlanner {
 public:
  enum class Source { case_rows, expansion };

  explicit FlowPlanner(const Model& model, FormulaOptions options = {},
                       Source source = Source::case_rows);

  /// Inhomogeneity with vanishing coefficients and zero factors removed.
  const Inhomogeneity& inhomogeneity(const EntryKey& key);
  bool is_zero(const EntryKey& key);

  /// Plan producing every nonzero target and its dependencies.
  VariationalPlan plan(std::span<const EntryKey> targets);

 private:
  void require(Pair pair, const MultiIndex& idx, VariationalPlan& plan,
               std::vector<std::pair<Pair, MultiIndex>>& added);

  const Model& model_;
  FormulaOptions options_;
  Source source_;
  std::map<EntryKey, Inhomogeneity> pruned_;
  std::map<std::pair<Pair, MultiIndex>, bool> zero_;
};

/// Every integrated key (r in 1..4) up to max_order; keys with a 5 only when
/// `deformation` is set.
std::vector<EntryKey> integrated_keys(int max_order, bool deformation);

/// Integrates the targets (and dependencies) jointly with the orbit on the
/// orbit's grid. Entries for all targets are present, zero ones tagged.
FlowTables build_flow_tables(const Model& model, const OrbitPrerequisites& orbit,
                             std::span<const EntryKey> targets, const FormulaOptions& options = {},
                             FlowPlanner::Source source = FlowPlanner::Source::case_rows);

FlowTables first_order_tables(const Model& model, const OrbitPrerequisites& orbit);
FlowTables second_order_tables(const Model& model, const OrbitPrerequisites& orbit,
                               const FormulaOptions& options = {});
FlowTables third_order_tables(const Model& model, const OrbitPrerequisites& orbit,
                              const FormulaOptions& options = {});

/// Adds the entries with time indices: x_0, x_00, x_000, x_0l, x_00l and
/// x_0lm for l, m in 1..5 (not both 5). Requires the tables to hold the
/// corresponding integrated entries.
void add_time_index_entries(FlowTables& tables, const Model& model,
                            const OrbitPrerequisites& orbit);

/// g^r_idx(t) along the orbit, evaluated from the tables.
FlowEntry inhomogeneity_function(const FlowTables& tables, const Model& model,
                                 const OrbitPrerequisites& orbit, const Inhomogeneity& g);

/// Solves x_top' = x_bot + g_top, x_bot' = -V_rr x_top + g_bot with zero
/// initial data on the orbit's grid. Both zero in, both zero out.
std::pair<FlowEntry, FlowEntry> solve_inhomogeneous(Pair pair, const FlowEntry& g_top,
                                                    const FlowEntry& g_bot, const Model& model,
                                                    const OrbitPrerequisites& orbit);

/// One column per nonzero entry: t, x^1_{1}, ...
void write_flow_tables_csv(const FlowTables& tables, std::ostream& out);

}  // namespace libration
