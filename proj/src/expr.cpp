#include "sonine/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "sonine/error.hpp"

namespace sonine::expr {

namespace {

// ---------------------------------------------------------------------------
// Node builders. They fold constants and a few identities (x*1, x+0, ...) so
// that derivative trees stay small; they never fold an operation that would
// raise a domain error, so that error is reported at evaluation time.

NodePtr make_const(double v, SourceSpan span = {}) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = v;
  n->span = span;
  return n;
}

NodePtr make_var(Var v, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->var = v;
  n->span = span;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->kind == Kind::Constant && n->value == v; }
bool is_const(const NodePtr& n) { return n->kind == Kind::Constant; }

NodePtr make_raw(Kind k, NodePtr a, NodePtr b, SourceSpan span) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  n->span = span;
  return n;
}

double apply_unary(Kind k, double a);
double apply_binary(Kind k, double a, double b);

NodePtr make_unary(Kind k, NodePtr a, SourceSpan span) {
  if (is_const(a)) {
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = apply_unary(k, a->value);
    } catch (const DomainError&) {
    }
    if (std::isfinite(v)) return make_const(v, span);
  }
  if (k == Kind::Neg && a->kind == Kind::Neg) return a->lhs;
  return make_raw(k, std::move(a), nullptr, span);
}

NodePtr make_binary(Kind k, NodePtr a, NodePtr b, SourceSpan span) {
  if (is_const(a) && is_const(b)) {
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = apply_binary(k, a->value, b->value);
    } catch (const DomainError&) {
    }
    if (std::isfinite(v)) return make_const(v, span);
  }
  switch (k) {
    case Kind::Add:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case Kind::Sub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make_unary(Kind::Neg, std::move(b), span);
      break;
    case Kind::Mul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0, span);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return make_unary(Kind::Neg, std::move(b), span);
      if (is_const(b, -1.0)) return make_unary(Kind::Neg, std::move(a), span);
      break;
    case Kind::Div:
      if (is_const(b, 1.0)) return a;
      break;
    case Kind::Pow:
      if (is_const(b, 1.0)) return a;
      if (is_const(b, 0.0)) return make_const(1.0, span);
      break;
    default:
      break;
  }
  return make_raw(k, std::move(a), std::move(b), span);
}

// ---------------------------------------------------------------------------
// Arithmetic with domain checks.

[[noreturn]] void domain_fail(const char* what, SourceSpan span = {}) {
  throw DomainError(std::string("expression domain error: ") + what + " (at byte " +
                    std::to_string(span.begin) + ")");
}

double apply_unary(Kind k, double a) {
  switch (k) {
    case Kind::Neg: return -a;
    case Kind::Exp: return std::exp(a);
    case Kind::Ln:
      if (!(a > 0.0)) domain_fail("ln of a nonpositive argument");
      return std::log(a);
    case Kind::Sin: return std::sin(a);
    case Kind::Cos: return std::cos(a);
    case Kind::Sqrt:
      if (a < 0.0) domain_fail("sqrt of a negative argument");
      return std::sqrt(a);
    default: break;
  }
  domain_fail("not a unary operator");
}

double apply_binary(Kind k, double a, double b) {
  switch (k) {
    case Kind::Add: return a + b;
    case Kind::Sub: return a - b;
    case Kind::Mul: return a * b;
    case Kind::Div:
      if (b == 0.0) domain_fail("division by zero");
      return a / b;
    case Kind::Pow:
      if (a == 0.0 && b < 0.0) domain_fail("0 raised to a negative power");
      if (a < 0.0 && b != std::floor(b)) domain_fail("negative base with non-integer exponent");
      return std::pow(a, b);
    default: break;
  }
  domain_fail("not a binary operator");
}

bool is_binary(Kind k) { return k >= Kind::Add; }

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t begin;
  std::size_t end;
  double number = 0.0;
  std::string_view text{};
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::size_t start = pos_;
    if (pos_ >= src_.size()) {
      current_ = {Tok::End, start, start};
      return;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number(start);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        ++pos_;
      current_ = {Tok::Ident, start, pos_, 0.0, src_.substr(start, pos_ - start)};
      return;
    }
    Tok k;
    switch (c) {
      case '+': k = Tok::Plus; break;
      case '-': k = Tok::Minus; break;
      case '*': k = Tok::Star; break;
      case '/': k = Tok::Slash; break;
      case '^': k = Tok::Caret; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      default:
        throw ParseError("parse error at byte " + std::to_string(start) + ": unexpected character '" +
                             std::string(1, c) + "'",
                         start, "number, variable, function, '(' or '-'");
    }
    ++pos_;
    current_ = {k, start, pos_};
  }

  void lex_number(std::size_t start) {
    while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;  // "2e" is the number 2 followed by an identifier
      }
    }
    std::string_view text = src_.substr(start, pos_ - start);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError("parse error at byte " + std::to_string(start) + ": malformed number '" +
                           std::string(text) + "'",
                       start, "number");
    current_ = {Tok::Number, start, pos_, v, text};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token current_{Tok::End, 0, 0};
};

// ---------------------------------------------------------------------------
// Pratt parser

constexpr int kBpAdd = 10;
constexpr int kBpMul = 20;
constexpr int kBpNeg = 30;
constexpr int kBpPow = 40;

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) {}

  NodePtr parse_all() {
    NodePtr n = parse(0);
    const Token& t = lex_.peek();
    if (t.kind != Tok::End) fail(t, "operator or end of input");
    return n;
  }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& expected) {
    std::string found = t.kind == Tok::End ? std::string("end of input")
                                           : "'" + std::string(t.text.empty() ? tok_text(t.kind) : t.text) + "'";
    throw ParseError("parse error at byte " + std::to_string(t.begin) + ": expected " + expected + ", found " + found,
                     t.begin, expected);
  }

  static std::string_view tok_text(Tok k) {
    switch (k) {
      case Tok::Plus: return "+";
      case Tok::Minus: return "-";
      case Tok::Star: return "*";
      case Tok::Slash: return "/";
      case Tok::Caret: return "^";
      case Tok::LParen: return "(";
      case Tok::RParen: return ")";
      default: return "";
    }
  }

  static int left_bp(Tok k) {
    switch (k) {
      case Tok::Plus:
      case Tok::Minus: return kBpAdd;
      case Tok::Star:
      case Tok::Slash: return kBpMul;
      case Tok::Caret: return kBpPow;
      default: return -1;
    }
  }

  NodePtr parse(int min_bp) {
    NodePtr lhs = prefix();
    for (;;) {
      const Token& op = lex_.peek();
      int bp = left_bp(op.kind);
      if (bp < 0 || bp <= min_bp) {
        if (bp < 0 && op.kind != Tok::End && op.kind != Tok::RParen) fail(op, "operator or end of input");
        break;
      }
      Token t = lex_.take();
      // '^' binds right: parse its right operand one notch looser.
      NodePtr rhs = parse(t.kind == Tok::Caret ? bp - 1 : bp);
      SourceSpan span{lhs->span.begin, rhs->span.end};
      Kind k = t.kind == Tok::Plus    ? Kind::Add
               : t.kind == Tok::Minus ? Kind::Sub
               : t.kind == Tok::Star  ? Kind::Mul
               : t.kind == Tok::Slash ? Kind::Div
                                      : Kind::Pow;
      lhs = make_raw(k, std::move(lhs), std::move(rhs), span);
    }
    return lhs;
  }

  NodePtr prefix() {
    Token t = lex_.take();
    switch (t.kind) {
      case Tok::Number: return make_const(t.number, {t.begin, t.end});
      case Tok::Minus: {
        NodePtr operand = parse(kBpNeg);
        SourceSpan span{t.begin, operand->span.end};
        return make_raw(Kind::Neg, std::move(operand), nullptr, span);
      }
      case Tok::LParen: {
        NodePtr inner = parse(0);
        const Token& close = lex_.peek();
        if (close.kind != Tok::RParen) fail(close, "')'");
        lex_.take();
        return inner;
      }
      case Tok::Ident: return identifier(t);
      default: fail(t, "number, variable, function, '(' or '-'");
    }
  }

  NodePtr identifier(const Token& t) {
    SourceSpan span{t.begin, t.end};
    if (t.text == "s") return make_var(Var::S, span);
    if (t.text == "t") return make_var(Var::T, span);
    if (t.text == "x") return make_var(Var::X, span);
    if (t.text == "pi") return make_const(std::numbers::pi, span);
    Kind fn;
    if (t.text == "exp") fn = Kind::Exp;
    else if (t.text == "ln") fn = Kind::Ln;
    else if (t.text == "sin") fn = Kind::Sin;
    else if (t.text == "cos") fn = Kind::Cos;
    else if (t.text == "sqrt") fn = Kind::Sqrt;
    else
      throw ParseError("parse error at byte " + std::to_string(t.begin) + ": unknown identifier '" +
                           std::string(t.text) + "'",
                       t.begin, "one of s, t, x, pi, exp, ln, sin, cos, sqrt");
    const Token& open = lex_.peek();
    if (open.kind != Tok::LParen) fail(open, "'(' after function name");
    lex_.take();
    NodePtr arg = parse(0);
    const Token& close = lex_.peek();
    if (close.kind != Tok::RParen) fail(close, "')'");
    span.end = lex_.take().end;
    return make_raw(fn, std::move(arg), nullptr, span);
  }

  Lexer lex_;
};

// ---------------------------------------------------------------------------
// Differentiation

bool node_depends(const Node& n, Var v) {
  if (n.kind == Kind::Variable) return n.var == v;
  if (n.kind == Kind::Constant) return false;
  if (n.lhs && node_depends(*n.lhs, v)) return true;
  return n.rhs && node_depends(*n.rhs, v);
}

NodePtr d(const NodePtr& n, Var v) {
  const SourceSpan sp = n->span;
  if (!node_depends(*n, v)) return make_const(0.0, sp);
  const NodePtr& a = n->lhs;
  const NodePtr& b = n->rhs;
  switch (n->kind) {
    case Kind::Constant: return make_const(0.0, sp);
    case Kind::Variable: return make_const(n->var == v ? 1.0 : 0.0, sp);
    case Kind::Neg: return make_unary(Kind::Neg, d(a, v), sp);
    case Kind::Exp: return make_binary(Kind::Mul, n, d(a, v), sp);
    case Kind::Ln: return make_binary(Kind::Div, d(a, v), a, sp);
    case Kind::Sin: return make_binary(Kind::Mul, make_unary(Kind::Cos, a, sp), d(a, v), sp);
    case Kind::Cos:
      return make_binary(Kind::Mul, make_unary(Kind::Neg, make_unary(Kind::Sin, a, sp), sp), d(a, v), sp);
    case Kind::Sqrt:
      return make_binary(Kind::Div, d(a, v), make_binary(Kind::Mul, make_const(2.0, sp), n, sp), sp);
    case Kind::Add: return make_binary(Kind::Add, d(a, v), d(b, v), sp);
    case Kind::Sub: return make_binary(Kind::Sub, d(a, v), d(b, v), sp);
    case Kind::Mul:
      return make_binary(Kind::Add, make_binary(Kind::Mul, d(a, v), b, sp), make_binary(Kind::Mul, a, d(b, v), sp), sp);
    case Kind::Div: {
      NodePtr num = make_binary(Kind::Sub, make_binary(Kind::Mul, d(a, v), b, sp),
                                make_binary(Kind::Mul, a, d(b, v), sp), sp);
      return make_binary(Kind::Div, num, make_binary(Kind::Mul, b, b, sp), sp);
    }
    case Kind::Pow: {
      if (!node_depends(*b, v)) {
        // b * a^(b-1) * a'
        NodePtr bm1 = make_binary(Kind::Sub, b, make_const(1.0, sp), sp);
        NodePtr p = make_binary(Kind::Pow, a, bm1, sp);
        return make_binary(Kind::Mul, make_binary(Kind::Mul, b, p, sp), d(a, v), sp);
      }
      if (!node_depends(*a, v)) {
        // a^b * ln(a) * b'
        return make_binary(Kind::Mul, make_binary(Kind::Mul, n, make_unary(Kind::Ln, a, sp), sp), d(b, v), sp);
      }
      // a^b * (b' ln a + b a'/a)
      NodePtr t1 = make_binary(Kind::Mul, d(b, v), make_unary(Kind::Ln, a, sp), sp);
      NodePtr t2 = make_binary(Kind::Div, make_binary(Kind::Mul, b, d(a, v), sp), a, sp);
      return make_binary(Kind::Mul, n, make_binary(Kind::Add, t1, t2, sp), sp);
    }
  }
  return make_const(0.0, sp);
}

// ---------------------------------------------------------------------------
// Serialization

std::string number_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write(const Node& n, std::string& out) {
  switch (n.kind) {
    case Kind::Constant:
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += "(-";
        out += number_text(-n.value);
        out += ")";
      } else {
        out += number_text(n.value);
      }
      return;
    case Kind::Variable: out += var_name(n.var); return;
    case Kind::Neg:
      out += "(-";
      write(*n.lhs, out);
      out += ")";
      return;
    case Kind::Exp:
    case Kind::Ln:
    case Kind::Sin:
    case Kind::Cos:
    case Kind::Sqrt: {
      static constexpr std::array<const char*, 5> names{"exp", "ln", "sin", "cos", "sqrt"};
      out += names[static_cast<std::size_t>(n.kind) - static_cast<std::size_t>(Kind::Exp)];
      out += "(";
      write(*n.lhs, out);
      out += ")";
      return;
    }
    default: {
      static constexpr std::array<char, 5> ops{'+', '-', '*', '/', '^'};
      out += "(";
      write(*n.lhs, out);
      out += ops[static_cast<std::size_t>(n.kind) - static_cast<std::size_t>(Kind::Add)];
      write(*n.rhs, out);
      out += ")";
      return;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

char var_name(Var v) {
  switch (v) {
    case Var::S: return 's';
    case Var::T: return 't';
    case Var::X: return 'x';
  }
  return '?';
}

Expr::Expr() : Expr(make_const(0.0)) {}

Expr::Expr(NodePtr root) : root_(std::move(root)) {
  compile(*root_);
  // Stack depth of the postfix program.
  std::size_t depth = 0;
  for (const Instr& ins : program_) {
    if (ins.kind == Kind::Constant || ins.kind == Kind::Variable) {
      ++depth;
      stack_depth_ = std::max(stack_depth_, depth);
    } else if (is_binary(ins.kind)) {
      --depth;
    }
  }
}

void Expr::compile(const Node& n) {
  if (n.lhs) compile(*n.lhs);
  if (n.rhs) compile(*n.rhs);
  if (n.kind == Kind::Variable) var_mask_ |= mask(n.var);
  program_.push_back({n.kind, n.var, n.value, n.span});
}

double Expr::eval(const Bindings& b) const {
  constexpr std::size_t kInline = 48;
  std::array<double, kInline> inline_stack;
  inline_stack[0] = 0.0;
  std::vector<double> heap_stack;
  double* stack = inline_stack.data();
  if (stack_depth_ > kInline) {
    heap_stack.resize(stack_depth_);
    stack = heap_stack.data();
  }
  std::size_t top = 0;
  for (const Instr& ins : program_) {
    switch (ins.kind) {
      case Kind::Constant: stack[top++] = ins.value; break;
      case Kind::Variable: {
        double v = ins.var == Var::S ? b.s : ins.var == Var::T ? b.t : b.x;
        if (std::isnan(v))
          throw DomainError(std::string("expression reads unbound variable '") + var_name(ins.var) + "'");
        stack[top++] = v;
        break;
      }
      case Kind::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Kind::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
      case Kind::Ln:
        if (!(stack[top - 1] > 0.0)) domain_fail("ln of a nonpositive argument", ins.span);
        stack[top - 1] = std::log(stack[top - 1]);
        break;
      case Kind::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Kind::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Kind::Sqrt:
        if (stack[top - 1] < 0.0) domain_fail("sqrt of a negative argument", ins.span);
        stack[top - 1] = std::sqrt(stack[top - 1]);
        break;
      case Kind::Add: --top; stack[top - 1] += stack[top]; break;
      case Kind::Sub: --top; stack[top - 1] -= stack[top]; break;
      case Kind::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Kind::Div:
        --top;
        if (stack[top] == 0.0) domain_fail("division by zero", ins.span);
        stack[top - 1] /= stack[top];
        break;
      case Kind::Pow: {
        --top;
        double base = stack[top - 1];
        double ex = stack[top];
        if (base == 0.0 && ex < 0.0) domain_fail("0 raised to a negative power", ins.span);
        if (base < 0.0 && ex != std::floor(ex)) domain_fail("negative base with non-integer exponent", ins.span);
        stack[top - 1] = ex == 2.0 ? base * base : std::pow(base, ex);
        break;
      }
    }
  }
  double r = stack[0];
  if (!std::isfinite(r)) throw DomainError("expression evaluated to a non-finite value");
  return r;
}

double Expr::constant_value() const {
  if (!is_constant()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return eval({});
  } catch (const DomainError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

bool Expr::is_zero() const { return root_->kind == Kind::Constant && root_->value == 0.0; }

Expr parse(std::string_view text) {
  bool blank = true;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
  if (blank) throw ParseError("parse error at byte 0: empty expression", 0, "an expression");
  Parser p(text);
  return Expr(p.parse_all());
}

double eval(const Expr& e, const Bindings& b) { return e.eval(b); }

Expr diff(const Expr& e, Var v) { return Expr(d(e.root_ptr(), v)); }

std::string serialize(const Expr& e) {
  std::string out;
  write(e.root(), out);
  return out;
}

}  // namespace sonine::expr
