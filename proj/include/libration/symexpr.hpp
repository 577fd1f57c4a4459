#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace libration {

/// Phase-space variables a field may depend on.
enum class Var : std::uint8_t { x = 0, y = 1, px = 2, py = 3 };

inline constexpr std::size_t kNumVars = 4;

/// Point in (x, y, px, py).
using PhasePoint = std::array<double, kNumVars>;

const char* var_name(Var v);

/// Raised for malformed expression source. `position` is a 0-based byte offset.
class ParseError : public std::runtime_error {
 public:
  enum class Kind { syntax, unknown_identifier, forbidden_variable };

  ParseError(Kind kind, std::size_t position, const std::string& message);

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  Kind kind_;
  std::size_t position_;
};

/// Immutable expression tree with shared subtrees.
///
/// Trees produced by the parser are kept as written; `folded()` applies
/// constant folding and flattening of associative chains. Differentiation
/// always returns a folded tree, so a derivative by an absent variable is
/// the constant 0.
class Expression {
 public:
  enum class Kind : std::uint8_t {
    constant,
    variable,
    negate,
    sin,
    cos,
    exp,
    log,  // internal only, produced by the exp/log rewrite of u^v
    sqrt,
    add,
    mul,
    div,
    pow,
  };

  Expression();  // constant 0

  static Expression constant(double value);
  static Expression variable(Var v);

  // Raw constructors, no folding.
  static Expression unary(Kind kind, Expression arg);
  static Expression binary(Kind kind, Expression lhs, Expression rhs);
  static Expression nary(Kind kind, std::vector<Expression> args);

  Kind kind() const;
  double constant_value() const;  // only valid for Kind::constant
  Var variable_id() const;        // only valid for Kind::variable
  std::span<const Expression> children() const;

  bool is_constant() const { return kind() == Kind::constant; }
  bool is_zero() const { return is_constant() && constant_value() == 0.0; }

  /// Recursive tree evaluation. Domain errors propagate as NaN/inf.
  double evaluate(const PhasePoint& point) const;

  Expression folded() const;
  Expression derivative(Var v) const;

  bool depends_on(Var v) const;
  std::size_t node_count() const;
  std::string to_string() const;

  /// Structural equality (same shape, same constants bit-for-bit).
  friend bool structurally_equal(const Expression& a, const Expression& b);

 private:
  struct Node;
  explicit Expression(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Folding builders used by differentiation and the folding pass.
Expression make_add(std::vector<Expression> terms);
Expression make_mul(std::vector<Expression> factors);
Expression make_neg(Expression a);
Expression make_div(Expression a, Expression b);
Expression make_pow(Expression base, Expression exponent);
Expression make_func(Expression::Kind kind, Expression arg);

/// Parses the infix expression language. Identifiers: x, y, px, py and the
/// functions sin, cos, exp, sqrt. Unary minus binds looser than '^', so
/// `-x^2` is `-(x^2)`. The returned tree is not folded.
Expression parse_expression(std::string_view source);

/// Flat postfix program for fast repeated evaluation of one expression.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expression& expr);

  double operator()(const PhasePoint& point) const;
  bool is_constant() const { return constant_.has_value(); }

 private:
  enum class Op : std::uint8_t {
    push_const, push_var, neg, sin, cos, exp, log, sqrt, add, mul, div, pow, powi
  };
  struct Instr {
    Op op;
    std::uint8_t arity;  // add/mul operand count, var id for push_var
    std::int32_t ivalue; // integer exponent for powi
    double value;
  };
  void emit(const Expression& e);

  std::vector<Instr> code_;
  std::size_t max_stack_ = 0;
  std::optional<double> constant_;
};

/// Derivative multi-index over (x, y, px, py), stored as per-variable counts.
class PartialIndex {
 public:
  constexpr PartialIndex() = default;
  PartialIndex(std::initializer_list<Var> vars);
  explicit PartialIndex(std::span<const Var> vars);
  static PartialIndex from_counts(std::array<std::uint8_t, kNumVars> counts);

  int order() const;
  std::uint8_t count(Var v) const { return counts_[static_cast<std::size_t>(v)]; }
  const std::array<std::uint8_t, kNumVars>& counts() const { return counts_; }
  std::string to_string() const;  // e.g. "x,x,y"; "" for the base field

  friend bool operator==(const PartialIndex&, const PartialIndex&) = default;

 private:
  std::array<std::uint8_t, kNumVars> counts_{};
};

enum class FieldKind { potential, deformation };

/// A scalar field with every partial derivative up to its supported order
/// precomputed and compiled. Immutable after construction, safe to share.
///
/// Potentials V(x, y) carry partials up to order 4, deformations
/// F(x, y, px, py) up to order 3.
class SymbolicField {
 public:
  SymbolicField(Expression base, FieldKind kind);

  /// Parses and validates `source`; px/py are rejected for potentials.
  static SymbolicField parse(std::string_view source, FieldKind kind);

  FieldKind kind() const { return kind_; }
  int max_order() const { return kind_ == FieldKind::potential ? 4 : 3; }
  const std::string& source() const { return source_; }

  const Expression& base() const { return partial(PartialIndex{}); }
  /// Throws std::out_of_range when the order exceeds max_order().
  const Expression& partial(const PartialIndex& index) const;
  const CompiledExpr& compiled(const PartialIndex& index) const;

  double value(const PhasePoint& p) const { return compiled(PartialIndex{})(p); }
  double partial_value(const PartialIndex& index, const PhasePoint& p) const {
    return compiled(index)(p);
  }

 private:
  static std::size_t slot(const PartialIndex& index);

  struct Entry {
    Expression expr;
    CompiledExpr code;
    bool present = false;
  };

  FieldKind kind_;
  std::string source_;
  std::shared_ptr<const std::vector<Entry>> entries_;
};

struct HypothesisReport {
  bool passed = true;
  double potential_violation = 0.0;    // max |V_x(0, y)|
  double deformation_violation = 0.0;  // max of |F_x|, |F_px| at (0, y, 0, py)
  double worst_y = 0.0;
  std::size_t probes = 0;
  std::string message;
};

/// Checks that the plane x = px = 0 is invariant: V_x(0, y) = 0 and, when a
/// deformation is given, F_x(0, y, 0, py) = F_px(0, y, 0, py) = 0.
HypothesisReport check_hypotheses(const SymbolicField& potential,
                                  const SymbolicField* deformation,
                                  std::span<const double> probe_ys,
                                  std::span<const double> probe_pys,
                                  double tolerance = 1e-12);

/// 33 Chebyshev nodes on [lo, hi] plus 10 evenly spaced probes on each side
/// in a margin of 10% of the width.
std::vector<double> default_probe_ys(double lo, double hi);

}  // namespace libration
