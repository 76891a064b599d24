// Arithmetic expression parser/evaluator for coefficient fields.
//
// Grammar (precedence low to high):
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := '-' factor | power
//   power   := atom ('^' factor)?            right-associative; binds tighter
//                                            than unary minus: -2^2 == -4
//   atom    := number | variable | func '(' expr ')' | '(' expr ')'
//   variable := 'x1'..'xN' | 't'
//   func     := sin | cos | exp | tanh | abs | sqrt
#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>

namespace levi {

// Parse error with the byte offset of the offending token.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, size_t position)
      : std::runtime_error(msg + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  size_t position() const { return position_; }

 private:
  size_t position_;
};

// Evaluation-time domain failure (division by zero, sqrt of a negative, a
// power with no real value). Never silently produces NaN.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

class Expr {
 public:
  struct Node;

  // Parse `src` with variables x1..x<dim> and t. Throws ParseError.
  static Expr parse(const std::string& src, int dim);

  // Evaluate at spatial point x (size >= dim) and time t. Throws EvalError.
  double eval(std::span<const double> x, double t) const;

  // Canonical fully-parenthesized rendering; parse(print()) round-trips.
  std::string print() const;

  int dim() const { return dim_; }

 private:
  Expr(std::shared_ptr<const Node> root, int dim) : root_(std::move(root)), dim_(dim) {}
  std::shared_ptr<const Node> root_;
  int dim_ = 0;
};

}  // namespace levi
