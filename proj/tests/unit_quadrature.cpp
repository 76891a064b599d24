#include "doctest.h"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "levi/iteration.hpp"
#include "levi/kernels.hpp"
#include "levi/quadrature.hpp"

using levi::KernelQuery;
using levi::PointEvaluator;
using levi::QuadratureScheme;
using levi::beta_convolution_reference;
using levi::gauss_legendre;
using levi::graded_map;
using levi::graded_map_derivative;
using levi::graded_map_inverse;
using levi::integrate_box;
using levi::integrate_graded_01;
using levi::spacetime_convolve;

namespace {
double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}
constexpr double kPi = 3.14159265358979323846;
}  // namespace

TEST_CASE("Gauss-Legendre rules: exactness, symmetry, memoization") {
  const auto& r5 = gauss_legendre(5);
  REQUIRE(r5.nodes.size() == 5);
  double wsum = 0.0;
  for (double w : r5.weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
  for (size_t i = 0; i < 5; ++i) {
    CHECK(r5.nodes[i] == doctest::Approx(-r5.nodes[4 - i]).epsilon(1e-14));
  }
  // m-point rule integrates polynomials up to degree 2m-1 exactly.
  auto integrate = [&](auto f) {
    double s = 0.0;
    for (size_t i = 0; i < r5.nodes.size(); ++i) s += r5.weights[i] * f(r5.nodes[i]);
    return s;
  };
  CHECK(integrate([](double x) { return std::pow(x, 8); }) ==
        doctest::Approx(2.0 / 9.0).epsilon(1e-13));
  CHECK(integrate([](double x) { return std::pow(x, 9); }) ==
        doctest::Approx(0.0).epsilon(1e-13));

  const auto& again = gauss_legendre(5);
  CHECK(&again == &r5);  // memoized
  const auto& r48 = gauss_legendre(48);
  CHECK(r48.nodes.size() == 48);
}

TEST_CASE("graded substitution map: endpoints, symmetry, reference digits, inverse") {
  for (double p : {2.0, 4.0, 8.0}) {
    CHECK(graded_map(0.0, p) == 0.0);
    CHECK(graded_map(1.0, p) == 1.0);
    CHECK(graded_map(0.5, p) == doctest::Approx(0.5).epsilon(1e-14));
    // Symmetry grade(1-v) = 1 - grade(v).
    for (double v : {0.1, 0.3, 0.45}) {
      CHECK(graded_map(1.0 - v, p) == doctest::Approx(1.0 - graded_map(v, p)).epsilon(1e-13));
    }
  }
  // 50-digit reference values at v = 0.3, p = 4.
  CHECK(rel_err(graded_map(0.3, 4.0), 0.032634971796937953263) < 1e-14);
  CHECK(rel_err(graded_map_derivative(0.3, 4.0), 0.60133200786192414555) < 1e-13);
  // Derivative against finite differences.
  for (double v : {0.2, 0.5, 0.8}) {
    const double h = 1e-6;
    const double fd = (graded_map(v + h, 4.0) - graded_map(v - h, 4.0)) / (2.0 * h);
    CHECK(rel_err(graded_map_derivative(v, 4.0), fd) < 1e-8);
  }
  // Inverse round-trip (bisection/Newton hybrid, honest to ~1e-11 near the
  // flat upper end of the map).
  for (double p : {2.0, 6.0}) {
    for (double v : {0.05, 0.3, 0.62, 0.97}) {
      CHECK(graded_map_inverse(graded_map(v, p), p) == doctest::Approx(v).epsilon(1e-10));
    }
  }
}

TEST_CASE("graded integration swallows endpoint singularities") {
  // Smooth integrand: the graded substitution turns a polynomial into a
  // non-polynomial integrand, so Gauss-Legendre is no longer exact — the
  // error converges spectrally instead (measured 1.7e-8 at 32 nodes).
  CHECK(rel_err(integrate_graded_01([](double u) { return 3.0 * u * u; }, 32, 4.0), 1.0) < 1e-7);
  // u^(-1/2)(1-u)^(-1/2) integrates to pi; singular at both endpoints.
  const double got =
      integrate_graded_01([](double u) { return 1.0 / std::sqrt(u * (1.0 - u)); }, 48, 4.0);
  CHECK(rel_err(got, kPi) < 1e-8);
  // One-sided singularity u^(-0.7): integral over [0,1] is 1/0.3.
  const double one_sided =
      integrate_graded_01([](double u) { return std::pow(u, -0.7); }, 64, 8.0);
  CHECK(rel_err(one_sided, 1.0 / 0.3) < 1e-7);
}

TEST_CASE("tensor box integration: polynomial exactness and Gaussian mass") {
  std::vector<double> c2 = {0.0, 0.0};
  const double poly = integrate_box(
      [](std::span<const double> x) { return x[0] * x[0] * x[1] * x[1]; }, c2, 1.0, 8);
  CHECK(rel_err(poly, 4.0 / 9.0) < 1e-13);

  std::vector<double> c1 = {0.7};
  const double mass = integrate_box(
      [&](std::span<const double> x) {
        const double d = x[0] - 0.7;
        return std::exp(-d * d);
      },
      c1, 9.0, 64);
  CHECK(rel_err(mass, std::sqrt(kPi)) < 1e-12);
}

TEST_CASE("space-time convolution reproduces the two-Gaussian closed form") {
  // Model pieces with algebraic time singularities at both ends of the window;
  // reference digits from 50-digit evaluation of the closed form.
  struct Case {
    double lambda, gamma, delta, want;
  };
  const Case cases[] = {
      {0.05, 0.5, 0.5, 49.185956517192474183},
      {0.04, 0.25, 0.75, 77.964493541883626799},
      {0.10, 0.75, 0.75, 81.083928815989136015},
  };
  auto qy = KernelQuery::from_offsets({0.0}, 0.0, {1.0}, 1.0);
  for (const auto& cs : cases) {
    CHECK(rel_err(beta_convolution_reference(cs.lambda, cs.gamma, cs.delta, qy), cs.want) < 1e-13);

    PointEvaluator f = [&](const double* x, double t, const double* eta, double sigma) {
      const double gap = t - sigma;
      const double d = x[0] - eta[0];
      return std::pow(gap, -0.5 - cs.gamma) * std::exp(-cs.lambda * d * d / (4.0 * gap));
    };
    PointEvaluator g = [&](const double* eta, double sigma, const double* xi, double tau) {
      const double gap = sigma - tau;
      const double d = eta[0] - xi[0];
      return std::pow(gap, -0.5 - cs.delta) * std::exp(-cs.lambda * d * d / (4.0 * gap));
    };
    QuadratureScheme quad;
    // lambda as small as 0.04 spreads the convolution Gaussian across most of
    // the box; 24/16 nodes plateau near 2e-2 there while 48/32 reach ~5e-5.
    quad.spatial_nodes = 48;
    quad.time_nodes = 32;
    quad.time_grading_exponent = 8.0;  // >= 2/(1 - max(gamma, delta))
    const double got = spacetime_convolve(f, g, qy, quad, 1.0 / cs.lambda);
    const double err = rel_err(got, cs.want);
    CHECK(err < 1e-3);

    // Refinement does not spoil the result (error within the converged band).
    const double refined = spacetime_convolve(f, g, qy, quad.refined(), 1.0 / cs.lambda);
    const double err_ref = rel_err(refined, cs.want);
    CHECK(err_ref <= err * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("space-time convolution flags non-finite integrand samples") {
  PointEvaluator f = [](const double*, double, const double*, double) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  PointEvaluator g = [](const double*, double, const double*, double) { return 1.0; };
  auto qy = KernelQuery::from_offsets({0.0}, 0.0, {1.0}, 1.0);
  QuadratureScheme quad;
  quad.spatial_nodes = 4;
  quad.time_nodes = 4;
  CHECK_THROWS_AS((void)spacetime_convolve(f, g, qy, quad, 1.0), std::runtime_error);
}
