#include "levi/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <utility>
#include <vector>

namespace levi {

namespace {

enum class Fn { kSin, kCos, kExp, kTanh, kAbs, kSqrt };

const char* fn_name(Fn f) {
  switch (f) {
    case Fn::kSin: return "sin";
    case Fn::kCos: return "cos";
    case Fn::kExp: return "exp";
    case Fn::kTanh: return "tanh";
    case Fn::kAbs: return "abs";
    case Fn::kSqrt: return "sqrt";
  }
  return "?";
}

}  // namespace

struct Expr::Node {
  enum class Kind { kNum, kVar, kTime, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall } kind;
  double value = 0.0;      // kNum
  int var_index = 0;       // kVar: 0-based spatial index
  Fn fn = Fn::kSin;        // kCall
  std::shared_ptr<const Node> lhs, rhs;  // rhs unused for unary kinds
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Kind = Expr::Node::Kind;

NodePtr make_node(Kind k, NodePtr l = nullptr, NodePtr r = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->kind = k;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

struct Token {
  enum class Type { kNum, kIdent, kOp, kLParen, kRParen, kEnd } type;
  double num = 0.0;
  std::string text;
  size_t pos = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token take() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_]))) ++i_;
    tok_.pos = i_;
    if (i_ >= src_.size()) {
      tok_.type = Token::Type::kEnd;
      tok_.text.clear();
      return;
    }
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      const char* start = src_.c_str() + i_;
      char* end = nullptr;
      tok_.num = std::strtod(start, &end);
      if (end == start) throw ParseError("malformed number", i_);
      tok_.type = Token::Type::kNum;
      tok_.text.assign(start, static_cast<size_t>(end - start));
      i_ += static_cast<size_t>(end - start);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t j = i_;
      while (j < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
        ++j;
      tok_.type = Token::Type::kIdent;
      tok_.text = src_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    if (c == '(') {
      tok_.type = Token::Type::kLParen;
    } else if (c == ')') {
      tok_.type = Token::Type::kRParen;
    } else if (c == '+' || c == '-' || c == '*' || c == '/' || c == '^') {
      tok_.type = Token::Type::kOp;
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'", i_);
    }
    tok_.text = std::string(1, c);
    ++i_;
  }

  const std::string& src_;
  size_t i_ = 0;
  Token tok_;
};

class Parser {
 public:
  Parser(const std::string& src, int dim) : lex_(src), dim_(dim) {}

  NodePtr parse() {
    NodePtr e = expr();
    const Token& t = lex_.peek();
    if (t.type != Token::Type::kEnd)
      throw ParseError("unexpected trailing input '" + t.text + "'", t.pos);
    return e;
  }

 private:
  NodePtr expr() {
    NodePtr e = term();
    while (lex_.peek().type == Token::Type::kOp &&
           (lex_.peek().text == "+" || lex_.peek().text == "-")) {
      const std::string op = lex_.take().text;
      e = make_node(op == "+" ? Kind::kAdd : Kind::kSub, e, term());
    }
    return e;
  }

  NodePtr term() {
    NodePtr e = factor();
    while (lex_.peek().type == Token::Type::kOp &&
           (lex_.peek().text == "*" || lex_.peek().text == "/")) {
      const std::string op = lex_.take().text;
      e = make_node(op == "*" ? Kind::kMul : Kind::kDiv, e, factor());
    }
    return e;
  }

  NodePtr factor() {
    if (lex_.peek().type == Token::Type::kOp && lex_.peek().text == "-") {
      lex_.take();
      return make_node(Kind::kNeg, factor());
    }
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (lex_.peek().type == Token::Type::kOp && lex_.peek().text == "^") {
      lex_.take();
      // Right-associative; the exponent may itself carry a unary minus.
      return make_node(Kind::kPow, base, factor());
    }
    return base;
  }

  NodePtr atom() {
    Token t = lex_.take();
    switch (t.type) {
      case Token::Type::kNum: {
        auto n = make_node(Kind::kNum);
        const_cast<Expr::Node*>(n.get())->value = t.num;
        return n;
      }
      case Token::Type::kIdent:
        return ident(std::move(t));
      case Token::Type::kLParen: {
        NodePtr e = expr();
        expect_rparen(t.pos);
        return e;
      }
      default:
        throw ParseError("expected a value, variable, or '('", t.pos);
    }
  }

  NodePtr ident(Token t) {
    if (t.text == "t") return make_node(Kind::kTime);
    if (t.text.size() >= 2 && t.text[0] == 'x') {
      bool digits = true;
      for (size_t i = 1; i < t.text.size(); ++i)
        digits = digits && std::isdigit(static_cast<unsigned char>(t.text[i]));
      if (digits) {
        const int idx = std::atoi(t.text.c_str() + 1);
        if (idx < 1 || idx > dim_)
          throw ParseError("variable '" + t.text + "' out of range for dimension " +
                               std::to_string(dim_),
                           t.pos);
        auto n = make_node(Kind::kVar);
        const_cast<Expr::Node*>(n.get())->var_index = idx - 1;
        return n;
      }
    }
    Fn fn;
    if (t.text == "sin") fn = Fn::kSin;
    else if (t.text == "cos") fn = Fn::kCos;
    else if (t.text == "exp") fn = Fn::kExp;
    else if (t.text == "tanh") fn = Fn::kTanh;
    else if (t.text == "abs") fn = Fn::kAbs;
    else if (t.text == "sqrt") fn = Fn::kSqrt;
    else throw ParseError("unknown identifier '" + t.text + "'", t.pos);

    Token open = lex_.take();
    if (open.type != Token::Type::kLParen)
      throw ParseError("expected '(' after function name", open.pos);
    NodePtr arg = expr();
    expect_rparen(open.pos);
    auto n = make_node(Kind::kCall, arg);
    const_cast<Expr::Node*>(n.get())->fn = fn;
    return n;
  }

  void expect_rparen(size_t open_pos) {
    Token t = lex_.take();
    if (t.type != Token::Type::kRParen)
      throw ParseError("missing ')' for '(' ", open_pos);
  }

  Lexer lex_;
  int dim_;
};

double eval_node(const Expr::Node& n, std::span<const double> x, double t) {
  switch (n.kind) {
    case Kind::kNum: return n.value;
    case Kind::kVar: return x[n.var_index];
    case Kind::kTime: return t;
    case Kind::kNeg: return -eval_node(*n.lhs, x, t);
    case Kind::kAdd: return eval_node(*n.lhs, x, t) + eval_node(*n.rhs, x, t);
    case Kind::kSub: return eval_node(*n.lhs, x, t) - eval_node(*n.rhs, x, t);
    case Kind::kMul: return eval_node(*n.lhs, x, t) * eval_node(*n.rhs, x, t);
    case Kind::kDiv: {
      const double denom = eval_node(*n.rhs, x, t);
      if (denom == 0.0) throw EvalError("division by zero");
      return eval_node(*n.lhs, x, t) / denom;
    }
    case Kind::kPow: {
      const double base = eval_node(*n.lhs, x, t);
      const double exponent = eval_node(*n.rhs, x, t);
      const double v = std::pow(base, exponent);
      if (std::isnan(v)) throw EvalError("power has no real value");
      return v;
    }
    case Kind::kCall: {
      const double a = eval_node(*n.lhs, x, t);
      switch (n.fn) {
        case Fn::kSin: return std::sin(a);
        case Fn::kCos: return std::cos(a);
        case Fn::kExp: return std::exp(a);
        case Fn::kTanh: return std::tanh(a);
        case Fn::kAbs: return std::abs(a);
        case Fn::kSqrt:
          if (a < 0.0) throw EvalError("sqrt of a negative value");
          return std::sqrt(a);
      }
      throw EvalError("unknown function");
    }
  }
  throw EvalError("corrupt expression node");
}

void print_node(const Expr::Node& n, std::ostringstream& out) {
  switch (n.kind) {
    case Kind::kNum: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out << buf;
      return;
    }
    case Kind::kVar: out << "x" << (n.var_index + 1); return;
    case Kind::kTime: out << "t"; return;
    case Kind::kNeg:
      out << "(-";
      print_node(*n.lhs, out);
      out << ")";
      return;
    case Kind::kAdd:
    case Kind::kSub:
    case Kind::kMul:
    case Kind::kDiv:
    case Kind::kPow: {
      const char* op = n.kind == Kind::kAdd   ? "+"
                       : n.kind == Kind::kSub ? "-"
                       : n.kind == Kind::kMul ? "*"
                       : n.kind == Kind::kDiv ? "/"
                                              : "^";
      out << "(";
      print_node(*n.lhs, out);
      out << op;
      print_node(*n.rhs, out);
      out << ")";
      return;
    }
    case Kind::kCall:
      out << fn_name(n.fn) << "(";
      print_node(*n.lhs, out);
      out << ")";
      return;
  }
}

}  // namespace

Expr Expr::parse(const std::string& src, int dim) {
  if (dim < 1) throw std::invalid_argument("Expr::parse: dimension must be >= 1");
  Parser p(src, dim);
  return Expr(p.parse(), dim);
}

double Expr::eval(std::span<const double> x, double t) const {
  if (static_cast<int>(x.size()) < dim_)
    throw std::invalid_argument("Expr::eval: point has too few coordinates");
  return eval_node(*root_, x, t);
}

std::string Expr::print() const {
  std::ostringstream out;
  print_node(*root_, out);
  return out.str();
}

}  // namespace levi
