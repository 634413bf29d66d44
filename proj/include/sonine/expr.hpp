#pragma once

// Scalar expressions in the variables s, t, x.
//
// Grammar (Pratt precedence, loosest first):
//   expr   := expr ('+' | '-') expr
//           | expr ('*' | '/') expr
//           | '-' expr
//           | expr '^' expr            (right associative)
//           | number | s | t | x | pi
//           | fn '(' expr ')'          fn in {exp, ln, sin, cos, sqrt}
//           | '(' expr ')'
//
// There is no implicit multiplication: "2t" is a syntax error.

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sonine::expr {

enum class Kind : std::uint8_t {
  Constant,
  Variable,
  Neg,
  Exp,
  Ln,
  Sin,
  Cos,
  Sqrt,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

enum class Var : std::uint8_t { S, T, X };

struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Kind kind = Kind::Constant;
  double value = 0.0;  // Constant only
  Var var = Var::T;    // Variable only
  NodePtr lhs;         // operand of unary nodes, left operand of binary nodes
  NodePtr rhs;
  SourceSpan span;
};

// Unbound variables are NaN; evaluating an expression that reads one is an
// error.
struct Bindings {
  double s = std::numeric_limits<double>::quiet_NaN();
  double t = std::numeric_limits<double>::quiet_NaN();
  double x = std::numeric_limits<double>::quiet_NaN();
};

// Immutable expression tree plus a flattened postfix program used for fast
// evaluation. Copies share the tree.
class Expr {
 public:
  Expr();  // the constant 0
  explicit Expr(NodePtr root);

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  // Throws DomainError on ln/sqrt of a negative argument, division by zero,
  // 0^negative, a negative base with non-integer exponent, any non-finite
  // result, or a read of an unbound variable.
  double eval(const Bindings& b) const;

  double operator()(double s, double t, double x = 0.0) const { return eval({s, t, x}); }

  bool depends_on(Var v) const { return (var_mask_ & mask(v)) != 0; }
  bool is_constant() const { return var_mask_ == 0; }
  // Value of a variable-free tree, or NaN when the tree depends on a variable
  // or cannot be evaluated.
  double constant_value() const;
  // True when the tree is literally the constant 0 (after builder folding).
  bool is_zero() const;

 private:
  struct Instr {
    Kind kind;
    Var var;
    double value;
    SourceSpan span;
  };

  static std::uint8_t mask(Var v) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(v)); }
  void compile(const Node& n);

  NodePtr root_;
  std::vector<Instr> program_;
  std::size_t stack_depth_ = 0;
  std::uint8_t var_mask_ = 0;
};

Expr parse(std::string_view text);
double eval(const Expr& e, const Bindings& b);
Expr diff(const Expr& e, Var v);

// Fully parenthesized infix text that parses back to an expression with the
// same value everywhere.
std::string serialize(const Expr& e);

char var_name(Var v);

}  // namespace sonine::expr
