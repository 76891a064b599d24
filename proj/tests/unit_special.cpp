#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "levi/special.hpp"

using levi::beta_fn;
using levi::gamma_fn;
using levi::log_gamma;
using levi::log_sum_exp;

namespace {
constexpr double kTight = 1e-13;

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}
}  // namespace

TEST_CASE("gamma function reproduces high-precision reference values") {
  // Reference digits computed with 50-digit arbitrary-precision arithmetic.
  CHECK(rel_err(gamma_fn(1.5), 0.88622692545275801365) < kTight);
  CHECK(rel_err(gamma_fn(0.5), 1.7724538509055160273) < kTight);
  CHECK(rel_err(gamma_fn(0.25), 3.6256099082219083119) < kTight);
  CHECK(gamma_fn(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gamma_fn(2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rel_err(gamma_fn(5.0), 24.0) < kTight);
}

TEST_CASE("gamma function satisfies the recurrence G(x+1) = x G(x)") {
  std::mt19937_64 eng(7u);
  std::uniform_real_distribution<double> u(0.05, 30.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(eng);
    CHECK(rel_err(gamma_fn(x + 1.0), x * gamma_fn(x)) < 1e-12);
  }
}

TEST_CASE("log_gamma stays accurate where gamma overflows") {
  CHECK(std::abs(log_gamma(200.5) - 860.58220350978249194) < 1e-10);
  // Consistency with the direct function where both are representable.
  for (double x : {0.1, 0.75, 1.0, 3.5, 20.0, 100.0}) {
    CHECK(rel_err(std::exp(log_gamma(x)), gamma_fn(x)) < 1e-12);
  }
  // Large arguments stay finite in log form.
  CHECK(std::isfinite(log_gamma(1e5)));
  CHECK(log_gamma(1e5) > 0.0);
}

TEST_CASE("beta function matches references and the B(1,b) = 1/b identity") {
  CHECK(rel_err(beta_fn(0.3, 0.7), 3.8832220774509331547) < kTight);
  CHECK(rel_err(beta_fn(1.25, 2.5), 0.27242156408229816213) < kTight);
  CHECK(rel_err(beta_fn(1.0, 0.5), 2.0) < kTight);
  CHECK(rel_err(beta_fn(0.5, 0.5), 3.14159265358979323846) < kTight);
  for (double b : {0.05, 0.25, 0.5, 0.9, 1.0}) {
    CHECK(rel_err(beta_fn(1.0, b), 1.0 / b) < 1e-13);
  }
  // Symmetry.
  CHECK(rel_err(beta_fn(0.3, 0.7), beta_fn(0.7, 0.3)) < 1e-14);
}

TEST_CASE("log_sum_exp handles empty input, ties, and extreme magnitudes") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp({}) == -inf);
  CHECK(std::abs(log_sum_exp({0.0, 0.0}) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(log_sum_exp({-1000.0, -1000.0, -1000.0}) - (-1000.0 + std::log(3.0))) < 1e-12);
  // Would overflow in the value domain.
  const double want = 1000.0 + std::log1p(std::exp(-1.0));
  CHECK(std::abs(log_sum_exp({1000.0, 999.0}) - want) < 1e-12);
  // Single element and -inf entries.
  CHECK(log_sum_exp({-3.25}) == doctest::Approx(-3.25).epsilon(1e-15));
  CHECK(std::abs(log_sum_exp({-inf, 2.0}) - 2.0) < 1e-15);
}
