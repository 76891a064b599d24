#include "doctest.h"

#include <cmath>
#include <vector>

#include "levi/expr.hpp"

using levi::EvalError;
using levi::Expr;
using levi::ParseError;

namespace {
double ev(const Expr& e, std::vector<double> x, double t) { return e.eval(x, t); }
}  // namespace

TEST_CASE("arithmetic, precedence, and associativity") {
  std::vector<double> x0 = {0.0};
  CHECK(ev(Expr::parse("1 + 2*3", 1), x0, 0.0) == doctest::Approx(7.0));
  CHECK(ev(Expr::parse("(1 + 2)*3", 1), x0, 0.0) == doctest::Approx(9.0));
  CHECK(ev(Expr::parse("7 - 3 - 2", 1), x0, 0.0) == doctest::Approx(2.0));
  CHECK(ev(Expr::parse("8 / 4 / 2", 1), x0, 0.0) == doctest::Approx(1.0));
  // Exponentiation binds tighter than unary minus and associates right.
  CHECK(ev(Expr::parse("-2^2", 1), x0, 0.0) == doctest::Approx(-4.0));
  CHECK(ev(Expr::parse("2^3^2", 1), x0, 0.0) == doctest::Approx(512.0));
  CHECK(ev(Expr::parse("2^-1", 1), x0, 0.0) == doctest::Approx(0.5));
  // Number formats.
  CHECK(ev(Expr::parse("1e-3 + 2.5E2", 1), x0, 0.0) == doctest::Approx(250.001));
  CHECK(ev(Expr::parse(".5", 1), x0, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("variables and functions evaluate against the C library") {
  Expr e = Expr::parse("2 + 0.5*sin(x1)*cos(t)", 1);
  CHECK(e.dim() == 1);
  for (double xv : {-2.0, 0.3, 1.7}) {
    for (double tv : {0.0, 0.6}) {
      const double want = 2.0 + 0.5 * std::sin(xv) * std::cos(tv);
      CHECK(ev(e, {xv}, tv) == doctest::Approx(want).epsilon(1e-15));
    }
  }
  Expr e2 = Expr::parse("exp(x1) + tanh(x2) - abs(x1*x2) + sqrt(t)", 2);
  CHECK(e2.dim() == 2);
  const double want = std::exp(0.4) + std::tanh(-1.2) - std::abs(0.4 * -1.2) + std::sqrt(2.25);
  CHECK(ev(e2, {0.4, -1.2}, 2.25) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("print() output reparses to an equivalent expression") {
  for (const char* src : {"2 + 0.5*sin(x1)*cos(t)", "-2^2 + x1/3", "abs(x1) - sqrt(exp(t))",
                          "(x1 + x2)^2 - tanh(x2*t)"}) {
    Expr e = Expr::parse(src, 2);
    Expr r = Expr::parse(e.print(), 2);
    for (double xv : {-1.1, 0.25}) {
      for (double yv : {0.7, -0.3}) {
        for (double tv : {0.1, 1.9}) {
          CHECK(ev(e, {xv, yv}, tv) == doctest::Approx(ev(r, {xv, yv}, tv)).epsilon(1e-15));
        }
      }
    }
  }
}

TEST_CASE("parse errors carry a useful position") {
  CHECK_THROWS_AS((void)Expr::parse("1 +", 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("sin()", 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("foo(x1)", 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("x3", 2), ParseError);   // variable beyond dimension
  CHECK_THROWS_AS((void)Expr::parse("x0", 2), ParseError);   // variables are 1-based
  CHECK_THROWS_AS((void)Expr::parse("(1 + 2", 1), ParseError);
  CHECK_THROWS_AS((void)Expr::parse("1 2", 1), ParseError);  // trailing garbage
  try {
    (void)Expr::parse("1 + @", 1);
    CHECK(false);
  } catch (const ParseError& pe) {
    CHECK(pe.position() >= 4);  // points at or after the offending character
  }
}

TEST_CASE("evaluation errors on undefined real results") {
  std::vector<double> x0 = {0.0};
  CHECK_THROWS_AS((void)ev(Expr::parse("1/x1", 1), x0, 0.0), EvalError);
  CHECK_THROWS_AS((void)ev(Expr::parse("sqrt(x1 - 1)", 1), x0, 0.0), EvalError);
  CHECK_THROWS_AS((void)ev(Expr::parse("(x1 - 2)^0.5", 1), x0, 0.0), EvalError);
  // The same expressions evaluate fine where defined.
  CHECK(ev(Expr::parse("1/x1", 1), {4.0}, 0.0) == doctest::Approx(0.25));
  CHECK(ev(Expr::parse("sqrt(x1 - 1)", 1), {5.0}, 0.0) == doctest::Approx(2.0));
}
