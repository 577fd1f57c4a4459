#include "libration/symexpr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <cstring>
#include <sstream>

namespace libration {

const char* var_name(Var v) {
  switch (v) {
    case Var::x: return "x";
    case Var::y: return "y";
    case Var::px: return "px";
    case Var::py: return "py";
  }
  return "?";
}

ParseError::ParseError(Kind kind, std::size_t position, const std::string& message)
    : std::runtime_error(message), kind_(kind), position_(position) {}

struct Expression::Node {
  Kind kind = Kind::constant;
  double value = 0.0;
  Var var = Var::x;
  std::vector<Expression> args;
};

namespace {

using Kind = Expression::Kind;

double apply_function(Kind k, double a) {
  switch (k) {
    case Kind::sin: return std::sin(a);
    case Kind::cos: return std::cos(a);
    case Kind::exp: return std::exp(a);
    case Kind::log: return std::log(a);
    case Kind::sqrt: return std::sqrt(a);
    case Kind::negate: return -a;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

bool integral_exponent(double e, int& n) {
  if (std::abs(e) > 64.0 || e != std::floor(e)) return false;
  n = static_cast<int>(e);
  return true;
}

double int_power(double base, int n) {
  bool invert = n < 0;
  unsigned m = static_cast<unsigned>(invert ? -n : n);
  double result = 1.0;
  double b = base;
  while (m != 0) {
    if (m & 1u) result *= b;
    b *= b;
    m >>= 1;
  }
  return invert ? 1.0 / result : result;
}

double power(double base, double exponent) {
  int n = 0;
  if (integral_exponent(exponent, n)) return int_power(base, n);
  return std::pow(base, exponent);
}

const char* function_name(Kind k) {
  switch (k) {
    case Kind::sin: return "sin";
    case Kind::cos: return "cos";
    case Kind::exp: return "exp";
    case Kind::log: return "log";
    case Kind::sqrt: return "sqrt";
    default: return "?";
  }
}

}  // namespace

Expression::Expression() : Expression(constant(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expression Expression::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::constant;
  n->value = value;
  return Expression(std::move(n));
}

Expression Expression::variable(Var v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::variable;
  n->var = v;
  return Expression(std::move(n));
}

Expression Expression::unary(Kind kind, Expression arg) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args.push_back(std::move(arg));
  return Expression(std::move(n));
}

Expression Expression::binary(Kind kind, Expression lhs, Expression rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args.push_back(std::move(lhs));
  n->args.push_back(std::move(rhs));
  return Expression(std::move(n));
}

Expression Expression::nary(Kind kind, std::vector<Expression> args) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = std::move(args);
  return Expression(std::move(n));
}

Expression::Kind Expression::kind() const { return node_->kind; }
double Expression::constant_value() const { return node_->value; }
Var Expression::variable_id() const { return node_->var; }
std::span<const Expression> Expression::children() const { return node_->args; }

double Expression::evaluate(const PhasePoint& point) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant: return n.value;
    case Kind::variable: return point[static_cast<std::size_t>(n.var)];
    case Kind::add: {
      double s = 0.0;
      for (const auto& a : n.args) s += a.evaluate(point);
      return s;
    }
    case Kind::mul: {
      double p = 1.0;
      for (const auto& a : n.args) p *= a.evaluate(point);
      return p;
    }
    case Kind::div: return n.args[0].evaluate(point) / n.args[1].evaluate(point);
    case Kind::pow: return power(n.args[0].evaluate(point), n.args[1].evaluate(point));
    default: return apply_function(n.kind, n.args[0].evaluate(point));
  }
}

bool Expression::depends_on(Var v) const {
  if (kind() == Kind::variable) return variable_id() == v;
  return std::any_of(node_->args.begin(), node_->args.end(),
                     [v](const Expression& a) { return a.depends_on(v); });
}

std::size_t Expression::node_count() const {
  std::size_t c = 1;
  for (const auto& a : node_->args) c += a.node_count();
  return c;
}

std::string Expression::to_string() const {
  const Node& n = *node_;
  std::ostringstream os;
  os.precision(17);
  switch (n.kind) {
    case Kind::constant:
      if (n.value < 0) os << '(' << n.value << ')';
      else os << n.value;
      break;
    case Kind::variable: os << var_name(n.var); break;
    case Kind::negate: os << "(-" << n.args[0].to_string() << ')'; break;
    case Kind::add:
    case Kind::mul: {
      os << '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) os << (n.kind == Kind::add ? " + " : "*");
        os << n.args[i].to_string();
      }
      os << ')';
      break;
    }
    case Kind::div: os << '(' << n.args[0].to_string() << '/' << n.args[1].to_string() << ')'; break;
    case Kind::pow: os << '(' << n.args[0].to_string() << '^' << n.args[1].to_string() << ')'; break;
    default: os << function_name(n.kind) << '(' << n.args[0].to_string() << ')'; break;
  }
  return os.str();
}

bool structurally_equal(const Expression& a, const Expression& b) {
  if (a.node_ == b.node_) return true;
  const auto& na = *a.node_;
  const auto& nb = *b.node_;
  if (na.kind != nb.kind || na.args.size() != nb.args.size()) return false;
  if (na.kind == Kind::constant) return std::memcmp(&na.value, &nb.value, sizeof(double)) == 0;
  if (na.kind == Kind::variable) return na.var == nb.var;
  for (std::size_t i = 0; i < na.args.size(); ++i)
    if (!structurally_equal(na.args[i], nb.args[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Folding builders

Expression make_add(std::vector<Expression> terms) {
  std::vector<Expression> flat;
  double c = 0.0;
  bool has_c = false;
  for (auto& t : terms) {
    if (t.kind() == Kind::add) {
      for (const auto& s : t.children()) {
        if (s.is_constant()) { c += s.constant_value(); has_c = true; }
        else flat.push_back(s);
      }
    } else if (t.is_constant()) {
      c += t.constant_value();
      has_c = true;
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (has_c && c != 0.0) flat.insert(flat.begin(), Expression::constant(c));
  if (flat.empty()) return Expression::constant(0.0);
  if (flat.size() == 1) return flat.front();
  return Expression::nary(Kind::add, std::move(flat));
}

Expression make_mul(std::vector<Expression> factors) {
  std::vector<Expression> flat;
  double c = 1.0;
  for (auto& f : factors) {
    if (f.kind() == Kind::mul) {
      for (const auto& s : f.children()) {
        if (s.is_constant()) c *= s.constant_value();
        else flat.push_back(s);
      }
    } else if (f.is_constant()) {
      c *= f.constant_value();
    } else {
      flat.push_back(std::move(f));
    }
  }
  if (c == 0.0) return Expression::constant(0.0);
  if (flat.empty()) return Expression::constant(c);
  if (c == -1.0 && flat.size() == 1) return make_neg(flat.front());
  if (c != 1.0) flat.insert(flat.begin(), Expression::constant(c));
  if (flat.size() == 1) return flat.front();
  return Expression::nary(Kind::mul, std::move(flat));
}

Expression make_neg(Expression a) {
  if (a.is_constant()) return Expression::constant(-a.constant_value());
  if (a.kind() == Kind::negate) return a.children()[0];
  return Expression::unary(Kind::negate, std::move(a));
}

Expression make_div(Expression a, Expression b) {
  if (b.is_constant() && b.constant_value() == 1.0) return a;
  if (a.is_zero()) return a;
  if (a.is_constant() && b.is_constant())
    return Expression::constant(a.constant_value() / b.constant_value());
  return Expression::binary(Kind::div, std::move(a), std::move(b));
}

Expression make_pow(Expression base, Expression exponent) {
  if (exponent.is_constant()) {
    double e = exponent.constant_value();
    if (e == 0.0) return Expression::constant(1.0);
    if (e == 1.0) return base;
    if (base.is_constant()) return Expression::constant(power(base.constant_value(), e));
  }
  return Expression::binary(Kind::pow, std::move(base), std::move(exponent));
}

Expression make_func(Kind kind, Expression arg) {
  if (kind == Kind::negate) return make_neg(std::move(arg));
  if (arg.is_constant()) return Expression::constant(apply_function(kind, arg.constant_value()));
  return Expression::unary(kind, std::move(arg));
}

Expression Expression::folded() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant:
    case Kind::variable: return *this;
    case Kind::add:
    case Kind::mul: {
      std::vector<Expression> args;
      args.reserve(n.args.size());
      for (const auto& a : n.args) args.push_back(a.folded());
      return n.kind == Kind::add ? make_add(std::move(args)) : make_mul(std::move(args));
    }
    case Kind::div: return make_div(n.args[0].folded(), n.args[1].folded());
    case Kind::pow: return make_pow(n.args[0].folded(), n.args[1].folded());
    default: return make_func(n.kind, n.args[0].folded());
  }
}

Expression Expression::derivative(Var v) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::constant: return constant(0.0);
    case Kind::variable: return constant(n.var == v ? 1.0 : 0.0);
    case Kind::negate: return make_neg(n.args[0].derivative(v));
    case Kind::add: {
      std::vector<Expression> terms;
      for (const auto& a : n.args) terms.push_back(a.derivative(v));
      return make_add(std::move(terms));
    }
    case Kind::mul: {
      std::vector<Expression> terms;
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        Expression d = n.args[i].derivative(v);
        if (d.is_zero()) continue;
        std::vector<Expression> f;
        for (std::size_t j = 0; j < n.args.size(); ++j) f.push_back(j == i ? d : n.args[j]);
        terms.push_back(make_mul(std::move(f)));
      }
      return make_add(std::move(terms));
    }
    case Kind::div: {
      const Expression& a = n.args[0];
      const Expression& b = n.args[1];
      Expression da = a.derivative(v);
      Expression db = b.derivative(v);
      Expression first = make_div(da, b);
      if (db.is_zero()) return first;
      Expression second = make_div(make_mul({a, db}), make_pow(b, constant(2.0)));
      return make_add({first, make_neg(second)});
    }
    case Kind::pow: {
      const Expression& a = n.args[0];
      const Expression& e = n.args[1];
      Expression da = a.derivative(v);
      if (e.is_constant()) {
        if (da.is_zero()) return constant(0.0);
        double c = e.constant_value();
        return make_mul({constant(c), make_pow(a, constant(c - 1.0)), da});
      }
      // u^w = exp(w log u)  =>  d(u^w) = u^w (w' log u + w u'/u)
      Expression de = e.derivative(v);
      std::vector<Expression> inner;
      if (!de.is_zero()) inner.push_back(make_mul({de, make_func(Kind::log, a)}));
      if (!da.is_zero()) inner.push_back(make_div(make_mul({e, da}), a));
      Expression s = make_add(std::move(inner));
      if (s.is_zero()) return s;
      return make_mul({*this, s});
    }
    case Kind::sin:
      return make_mul({make_func(Kind::cos, n.args[0]), n.args[0].derivative(v)});
    case Kind::cos:
      return make_neg(make_mul({make_func(Kind::sin, n.args[0]), n.args[0].derivative(v)}));
    case Kind::exp: return make_mul({*this, n.args[0].derivative(v)});
    case Kind::log: return make_div(n.args[0].derivative(v), n.args[0]);
    case Kind::sqrt: {
      Expression da = n.args[0].derivative(v);
      if (da.is_zero()) return da;
      return make_div(da, make_mul({constant(2.0), *this}));
    }
  }
  return constant(0.0);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Expression parse() {
    skip_ws();
    if (pos_ >= src_.size()) fail(pos_, "expected expression, found end of input");
    Expression e = parse_expr();
    skip_ws();
    if (pos_ < src_.size())
      fail(pos_, std::string("expected operator or end of input, found '") + src_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw ParseError(ParseError::Kind::syntax, at, "at " + std::to_string(at) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      std::string found = pos_ < src_.size() ? std::string("'") + src_[pos_] + "'" : "end of input";
      fail(pos_, std::string("expected '") + c + "', found " + found);
    }
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+')) lhs = Expression::nary(Kind::add, {lhs, parse_term()});
      else if (accept('-')) lhs = Expression::nary(Kind::add, {lhs, Expression::unary(Kind::negate, parse_term())});
      else return lhs;
    }
  }

  Expression parse_term() {
    Expression lhs = parse_factor();
    for (;;) {
      if (accept('*')) lhs = Expression::nary(Kind::mul, {lhs, parse_factor()});
      else if (accept('/')) lhs = Expression::binary(Kind::div, lhs, parse_factor());
      else return lhs;
    }
  }

  // factor := '-' factor | power ; power := primary ('^' factor)?
  Expression parse_factor() {
    if (accept('-')) return Expression::unary(Kind::negate, parse_factor());
    Expression base = parse_primary();
    if (accept('^')) return Expression::binary(Kind::pow, base, parse_factor());
    return base;
  }

  Expression parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail(pos_, "expected number, identifier or '(', found end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(pos_, std::string("expected number, identifier or '(', found '") + c + "'");
  }

  Expression parse_number() {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) fail(start, "malformed number");
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // not an exponent; the caller reports what follows
    }
    std::string text(src_.substr(start, pos_ - start));
    return Expression::constant(std::stod(text));
  }

  Expression parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    static constexpr std::pair<const char*, Var> vars[] = {
        {"x", Var::x}, {"y", Var::y}, {"px", Var::px}, {"py", Var::py}};
    static constexpr std::pair<const char*, Kind> funcs[] = {
        {"sin", Kind::sin}, {"cos", Kind::cos}, {"exp", Kind::exp}, {"sqrt", Kind::sqrt}};
    for (const auto& [vn, v] : vars) {
      if (name == vn) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(')
          fail(pos_, "'" + name + "' is a variable, not a function");
        return Expression::variable(v);
      }
    }
    for (const auto& [fn, k] : funcs) {
      if (name == fn) {
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != '(')
          fail(pos_, "expected '(' after function '" + name + "'");
        ++pos_;
        Expression arg = parse_expr();
        expect(')');
        return Expression::unary(k, arg);
      }
    }
    throw ParseError(ParseError::Kind::unknown_identifier, start,
                     "at " + std::to_string(start) + ": unknown identifier '" + name + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view source) { return Parser(source).parse(); }

// ---------------------------------------------------------------------------
// Compiled evaluation

CompiledExpr::CompiledExpr(const Expression& expr) {
  if (expr.is_constant()) constant_ = expr.constant_value();
  emit(expr);
  // stack depth: simulate
  std::size_t depth = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::push_const:
      case Op::push_var: ++depth; break;
      case Op::add:
      case Op::mul: depth -= ins.arity - 1; break;
      case Op::div:
      case Op::pow: --depth; break;
      default: break;
    }
    max_stack_ = std::max(max_stack_, depth);
  }
}

void CompiledExpr::emit(const Expression& e) {
  switch (e.kind()) {
    case Kind::constant: code_.push_back({Op::push_const, 0, 0, e.constant_value()}); return;
    case Kind::variable:
      code_.push_back({Op::push_var, static_cast<std::uint8_t>(e.variable_id()), 0, 0.0});
      return;
    case Kind::add:
    case Kind::mul: {
      // long chains are split so the arity fits in a byte
      auto ch = e.children();
      emit(ch[0]);
      std::size_t i = 1;
      while (i < ch.size()) {
        std::size_t n = std::min<std::size_t>(ch.size() - i, 200);
        for (std::size_t j = 0; j < n; ++j) emit(ch[i + j]);
        code_.push_back({e.kind() == Kind::add ? Op::add : Op::mul,
                         static_cast<std::uint8_t>(n + 1), 0, 0.0});
        i += n;
      }
      return;
    }
    case Kind::div:
      emit(e.children()[0]);
      emit(e.children()[1]);
      code_.push_back({Op::div, 2, 0, 0.0});
      return;
    case Kind::pow: {
      emit(e.children()[0]);
      const Expression& ex = e.children()[1];
      int n = 0;
      if (ex.is_constant() && integral_exponent(ex.constant_value(), n)) {
        code_.push_back({Op::powi, 1, n, 0.0});
      } else {
        emit(ex);
        code_.push_back({Op::pow, 2, 0, 0.0});
      }
      return;
    }
    default: {
      emit(e.children()[0]);
      Op op = Op::neg;
      switch (e.kind()) {
        case Kind::negate: op = Op::neg; break;
        case Kind::sin: op = Op::sin; break;
        case Kind::cos: op = Op::cos; break;
        case Kind::exp: op = Op::exp; break;
        case Kind::log: op = Op::log; break;
        case Kind::sqrt: op = Op::sqrt; break;
        default: break;
      }
      code_.push_back({op, 1, 0, 0.0});
      return;
    }
  }
}

double CompiledExpr::operator()(const PhasePoint& point) const {
  if (constant_) return *constant_;
  constexpr std::size_t kInline = 64;
  double inline_stack[kInline];
  std::vector<double> heap;
  double* st = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(max_stack_);
    st = heap.data();
  }
  std::size_t sp = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Op::push_const: st[sp++] = ins.value; break;
      case Op::push_var: st[sp++] = point[ins.arity]; break;
      case Op::neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::log: st[sp - 1] = std::log(st[sp - 1]); break;
      case Op::sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
      case Op::add: {
        std::size_t base = sp - ins.arity;
        double s = st[base];
        for (std::size_t j = base + 1; j < sp; ++j) s += st[j];
        st[base] = s;
        sp = base + 1;
        break;
      }
      case Op::mul: {
        std::size_t base = sp - ins.arity;
        double p = st[base];
        for (std::size_t j = base + 1; j < sp; ++j) p *= st[j];
        st[base] = p;
        sp = base + 1;
        break;
      }
      case Op::div: st[sp - 2] /= st[sp - 1]; --sp; break;
      case Op::pow: st[sp - 2] = power(st[sp - 2], st[sp - 1]); --sp; break;
      case Op::powi: st[sp - 1] = int_power(st[sp - 1], ins.ivalue); break;
    }
  }
  return st[0];
}

}  // namespace libration
