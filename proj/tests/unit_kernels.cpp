#include "doctest.h"

#include <cmath>
#include <vector>

#include "levi/kernels.hpp"
#include "levi/quadrature.hpp"
#include "levi/spd.hpp"

using levi::GenGaussKernel;
using levi::KernelQuery;
using levi::SpdMatrix;
using levi::gauss_kernel;
using levi::log_gauss_kernel;

namespace {
double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}
constexpr double kPi = 3.14159265358979323846;
}  // namespace

TEST_CASE("query anchoring preserves offsets exactly, including tiny gaps") {
  auto q = KernelQuery::from_offsets({0.3}, 0.1, {0.8}, 0.5);
  CHECK(q.dim() == 1);
  CHECK(q.xi()[0] == 0.3);
  CHECK(q.tau() == 0.1);
  CHECK(q.dx()[0] == 0.8);
  CHECK(q.dt() == 0.5);
  CHECK(q.x()[0] == doctest::Approx(1.1));
  CHECK(q.t() == doctest::Approx(0.6));
  CHECK(q.rho2() == doctest::Approx(0.64).epsilon(1e-15));

  auto p = KernelQuery::from_points(std::vector<double>{1.1}, 0.6, std::vector<double>{0.3}, 0.1);
  CHECK(p.dx()[0] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(p.dt() == doctest::Approx(0.5).epsilon(1e-14));

  // Offsets below coordinate resolution survive untouched.
  auto tiny = KernelQuery::from_offsets({5.0}, 3.0, {1e-120}, 1e-240);
  CHECK(tiny.dt() == 1e-240);
  CHECK(tiny.dx()[0] == 1e-120);
  CHECK(tiny.rho2() == doctest::Approx(1e-240).epsilon(1e-12));

  auto q2 = KernelQuery::from_offsets({0.0, 0.0}, 0.0, {3.0, 4.0}, 1.0);
  CHECK(q2.rho2() == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("scalar heat kernel matches high-precision references") {
  CHECK(rel_err(gauss_kernel(0.0, 1.0, 1), 0.28209479177387814347) < 1e-14);
  CHECK(rel_err(gauss_kernel(4.0, 1.0, 1), 0.10377687435514867584) < 1e-14);
  CHECK(rel_err(gauss_kernel(1.0, 0.25, 2), 0.11709966304863832138) < 1e-14);
  // log form agrees where the value is representable...
  for (double rho2 : {0.0, 1.0, 9.0}) {
    for (double dt : {0.05, 1.0}) {
      for (int n : {1, 2}) {
        CHECK(rel_err(std::exp(log_gauss_kernel(rho2, dt, n)), gauss_kernel(rho2, dt, n)) < 1e-13);
      }
    }
  }
  // ...and stays finite far past value-domain underflow/overflow.
  CHECK(std::isfinite(log_gauss_kernel(100.0, 1e-300, 1)));
  CHECK(gauss_kernel(100.0, 1e-300, 1) == 0.0);  // value underflows to zero, not NaN
  const double lg = log_gauss_kernel(4.0, 0.01, 1);
  CHECK(std::abs(lg - (-0.5 * std::log(4.0 * kPi * 0.01) - 100.0)) < 1e-10);
}

TEST_CASE("matrix kernel with identity exponent reduces to the scalar kernel") {
  GenGaussKernel g(SpdMatrix::identity(2));
  CHECK(g.det() == doctest::Approx(1.0));
  std::vector<double> dx = {0.6, -0.8};
  for (double dt : {0.1, 1.0, 2.5}) {
    CHECK(rel_err(g.value(dx, dt), gauss_kernel(1.0, dt, 2)) < 1e-14);
    CHECK(rel_err(std::exp(g.log_value(dx, dt)), g.value(dx, dt)) < 1e-13);
  }
}

TEST_CASE("matrix kernel value agrees with the closed form for a general exponent") {
  SpdMatrix a(2, {2.0, 0.5, 0.5, 1.0});
  GenGaussKernel g(a);
  const double det = 2.0 * 1.0 - 0.25;
  CHECK(g.det() == doctest::Approx(det).epsilon(1e-14));
  std::vector<double> dx = {0.7, -0.4};
  const double dt = 0.6;
  const double quad = 2.0 * 0.49 + 2.0 * 0.5 * 0.7 * (-0.4) + 1.0 * 0.16;
  const double want = std::sqrt(det) / (4.0 * kPi * dt) * std::exp(-quad / (4.0 * dt));
  CHECK(rel_err(g.value(dx, dt), want) < 1e-14);
}

TEST_CASE("closed-form derivatives agree with finite differences") {
  SpdMatrix a(2, {2.0, 0.5, 0.5, 1.0});
  GenGaussKernel g(a);
  std::vector<double> dx = {0.7, -0.4};
  const double dt = 0.6;
  auto d = g.derivatives(dx, dt);
  CHECK(rel_err(d.value, g.value(dx, dt)) < 1e-14);

  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    std::vector<double> p = dx, m = dx;
    p[i] += h;
    m[i] -= h;
    const double fd = (g.value(p, dt) - g.value(m, dt)) / (2.0 * h);
    CHECK(rel_err(d.gradient[i], fd) < 1e-6);
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      std::vector<double> pp = dx, pm = dx, mp = dx, mm = dx;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      const double fd =
          (g.value(pp, dt) - g.value(pm, dt) - g.value(mp, dt) + g.value(mm, dt)) / (4.0 * h * h);
      CHECK(std::abs(d.hessian.at(i, j) - fd) < 2e-5 * std::abs(d.value) / dt);
    }
  }
  const double ht = 1e-6;
  const double fdt = (g.value(dx, dt + ht) - g.value(dx, dt - ht)) / (2.0 * ht);
  CHECK(rel_err(d.time, fdt) < 1e-6);
}

TEST_CASE("heat identity residual is rounding-level") {
  SpdMatrix a(2, {2.0, 0.5, 0.5, 1.0});
  GenGaussKernel g(a);
  for (double dt : {0.05, 0.4, 1.7}) {
    for (double x0 : {0.0, 0.9}) {
      std::vector<double> dx = {x0, -0.3};
      auto d = g.derivatives(dx, dt);
      const double scale = std::max(std::abs(d.time), d.value / dt);
      CHECK(std::abs(g.heat_residual(dx, dt)) <= 1e-11 * scale);
    }
  }
  GenGaussKernel g1(SpdMatrix::identity(1));
  std::vector<double> dx1 = {1.3};
  auto d1 = g1.derivatives(dx1, 0.7);
  CHECK(std::abs(g1.heat_residual(dx1, 0.7)) <= 1e-11 * std::max(std::abs(d1.time), d1.value / 0.7));
}

TEST_CASE("numeric mass is 1 with a rigorous tail bound") {
  // The radius factor 8 makes the truncated-exterior tail negligible; the
  // remaining error is pure Gauss-Legendre resolution.  The default 24 nodes
  // span the box at roughly 0.85 sigma per node in the anisotropic 2-D case,
  // which only reaches ~5e-4; 48 nodes reach ~1e-13 in every case below.
  levi::QuadratureScheme quad;  // 24 nodes per axis, radius factor 8
  levi::QuadratureScheme fine;
  fine.spatial_nodes = 48;
  {
    GenGaussKernel g(SpdMatrix::identity(1));
    double tail = 0.0;
    const double m = g.mass(0.3, quad, &tail);
    CHECK(std::abs(m - 1.0) < 1e-6);
    CHECK(tail >= 0.0);
    CHECK(tail < 1e-8);
    double tail_fine = 0.0;
    const double m_fine = g.mass(0.3, fine, &tail_fine);
    CHECK(std::abs(m_fine - 1.0) < 1e-12);
    CHECK(tail_fine < 1e-8);
  }
  {
    SpdMatrix a(2, {2.0, 0.5, 0.5, 1.0});
    GenGaussKernel g(a);
    double tail = 0.0;
    const double m = g.mass(0.8, fine, &tail);
    CHECK(std::abs(m - 1.0) < 1e-10);
    CHECK(tail < 1e-6);
  }
}

TEST_CASE("kernels compose over an intermediate time (semigroup property)") {
  // integral over eta of G(x - eta, t - s) G(eta - xi, s) equals G(x - xi, t).
  GenGaussKernel g(SpdMatrix::identity(1));
  const double t = 1.0, s = 0.35, x = 0.9, xi = -0.2;
  auto f = [&](std::span<const double> eta) {
    std::vector<double> d1 = {x - eta[0]};
    std::vector<double> d2 = {eta[0] - xi};
    return g.value(d1, t - s) * g.value(d2, s);
  };
  std::vector<double> center = {0.5 * (x + xi)};
  const double got = levi::integrate_box(f, center, 10.0, 96);
  std::vector<double> dfull = {x - xi};
  CHECK(rel_err(got, g.value(dfull, t)) < 1e-9);
}
