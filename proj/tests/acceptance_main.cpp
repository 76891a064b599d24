// Acceptance gate: ten end-to-end checks covering constant-coefficient
// exactness, the singular-product quadrature, kernel identities, the
// correction envelopes, two-sided certification, constant cross-checks,
// finite-difference oracle agreement, the semigroup identity, and the
// sharpened upper envelope. One PASS/FAIL line per criterion; exit code 0
// iff all ten pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "levi/bounds.hpp"
#include "levi/coeffs.hpp"
#include "levi/grid.hpp"
#include "levi/iteration.hpp"
#include "levi/kernels.hpp"
#include "levi/oracle.hpp"
#include "levi/parametrix.hpp"
#include "levi/quadrature.hpp"
#include "levi/spd.hpp"
#include "test_helpers.hpp"

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double now_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return std::string(buf);
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : -kInf; }

// Field whose sampled coefficients are never consulted: carries only the
// declared structural constants, for the closed-form constant pipeline.
std::shared_ptr<const levi::CoefficientField> descriptor_field(int n, double alpha, double kappa,
                                                               double M, double N1, double N2) {
  auto a = [kappa](std::span<const double>, double, levi::SpdMatrix& out) {
    for (int i = 0; i < out.dim(); ++i) out.at(i, i) = kappa;
  };
  auto b = [](std::span<const double>, double, std::span<double> out) {
    for (double& v : out) v = 0.0;
  };
  auto q = [](std::span<const double>, double) { return 0.0; };
  return std::make_shared<levi::CoefficientField>(n, alpha, kappa, M, N1, N2, a, b, q, true,
                                                  true);
}

// The shared rough-free test field: a(x,t) = 2 + 0.5 sin(x) cos(t) with the
// Hoelder constant resolved from the sampled seminorm, inflated by 1.1.
struct MildSetup {
  std::shared_ptr<const levi::CoefficientField> field;
  levi::BoundConstants k;
  double n1_resolved = 0.0;
};

const MildSetup& mild_setup() {
  static const MildSetup s = [] {
    auto probe = levi_test::mild_field(1.0);  // declared value irrelevant to sampling
    levi::Region reg;
    reg.x_lo = {-6.0};
    reg.x_hi = {6.0};
    reg.t_lo = 0.0;
    reg.t_hi = 2.0;
    levi::HolderEstimate est = levi::estimate_holder_seminorm(*probe, 6000, reg, 20260816ull);
    MildSetup out;
    out.n1_resolved = 1.1 * est.value;
    out.field = levi_test::mild_field(out.n1_resolved);
    out.k = levi::compute_constants(*out.field);
    return out;
  }();
  return s;
}

// ---------------------------------------------------------------------------
// 1. Constant-coefficient exactness: a = I, b = q = 0, n = 1. The residual
// factor vanishes identically, so the construction must return the scalar
// heat kernel to rounding accuracy at 10^4 random queries in under a second.
bool crit_constant_exactness(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  levi::LeviOptions opt;
  opt.horizon = 5.0;  // direct assembly everywhere; the series is identically zero
  levi::LeviEvaluator ev(levi_test::const_field(1), levi::QuadratureScheme{}, opt);

  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double max_rel = 0.0;
  const int nq = 10000;
  for (int i = 0; i < nq; ++i) {
    const double xi = -2.0 + 4.0 * U(eng);
    const double tau = U(eng);
    const double dt = 5.0 * (1.0 - U(eng));  // (0, 5]
    const double z = -4.0 + 8.0 * U(eng);
    const double dx = z * std::sqrt(dt);
    auto qy = levi::KernelQuery::from_offsets({xi}, tau, {dx}, dt);
    const double got = ev.evaluate(qy);
    const double want = levi::gauss_kernel(qy.rho2(), dt, 1);
    max_rel = std::max(max_rel, std::abs(got - want) / want);
  }
  const double secs = now_seconds(t0);
  detail = fmt("max rel err %.2e over %d queries, %.2f s", max_rel, nq, secs);
  return max_rel <= 1e-10 && secs < 1.0;
}

// ---------------------------------------------------------------------------
// 2. Singular-product quadrature sweep: the graded space-time convolution of
// two power-law/Gaussian factors against its closed Beta-function value on a
// 3x3x3 parameter grid, with one refinement step not spoiling any case.
bool crit_quadrature_sweep(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto qy = levi::KernelQuery::from_offsets({0.0}, 0.0, {1.0}, 1.0);
  double worst = 0.0;
  int refine_regressions = 0;
  for (double lambda : {0.04, 0.05, 0.10}) {
    for (double gam : {0.25, 0.5, 0.75}) {
      for (double del : {0.25, 0.5, 0.75}) {
        const double want = levi::beta_convolution_reference(lambda, gam, del, qy);
        levi::PointEvaluator f = [&](const double* x, double t, const double* eta,
                                     double sigma) {
          const double gap = t - sigma;
          const double d = x[0] - eta[0];
          return std::pow(gap, -0.5 - gam) * std::exp(-lambda * d * d / (4.0 * gap));
        };
        levi::PointEvaluator g = [&](const double* eta, double sigma, const double* xi,
                                     double tau) {
          const double gap = sigma - tau;
          const double d = eta[0] - xi[0];
          return std::pow(gap, -0.5 - del) * std::exp(-lambda * d * d / (4.0 * gap));
        };
        levi::QuadratureScheme quad;
        // The flattest case (lambda = 0.04) spreads the integrand's Gaussian
        // across most of the integration box; 24/16 nodes only reach ~2e-2
        // there, while 48/32 reach ~5e-5.
        quad.spatial_nodes = 48;
        quad.time_nodes = 32;
        quad.time_grading_exponent = 8.0;
        const double got = levi::spacetime_convolve(f, g, qy, quad, 1.0 / lambda);
        const double err = std::abs(got - want) / want;
        worst = std::max(worst, err);
        const double refined = levi::spacetime_convolve(f, g, qy, quad.refined(), 1.0 / lambda);
        const double err_ref = std::abs(refined - want) / want;
        if (err_ref > err * (1.0 + 1e-9) + 1e-12) ++refine_regressions;
      }
    }
  }
  const double secs = now_seconds(t0);
  detail = fmt("27 cases, worst rel err %.2e, refine regressions %d, %.2f s", worst,
               refine_regressions, secs);
  return worst <= 1e-3 && refine_regressions == 0 && secs < 60.0;
}

// ---------------------------------------------------------------------------
// 3. Kernel identities: the anisotropic Gaussian satisfies its own evolution
// identity to rounding at random (a, x, t); its mass integrates to 1; its
// closed-form derivatives match finite differences of one another.
bool crit_kernel_identities(std::string& detail) {
  std::mt19937_64 eng(33);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  double worst_resid = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = (i < 500) ? 1 : 2;
    levi::SpdMatrix a(n);
    if (n == 1) {
      a.at(0, 0) = 0.5 + 2.5 * U(eng);
    } else {
      const double l1 = 0.5 + 2.5 * U(eng), l2 = 0.5 + 2.5 * U(eng);
      const double th = 3.14159265358979323846 * U(eng);
      const double cs = std::cos(th), sn = std::sin(th);
      a.at(0, 0) = cs * cs * l1 + sn * sn * l2;
      a.at(1, 1) = sn * sn * l1 + cs * cs * l2;
      a.at(0, 1) = cs * sn * (l1 - l2);
      a.at(1, 0) = a.at(0, 1);
    }
    levi::GenGaussKernel g(a);
    std::vector<double> dx(static_cast<size_t>(n));
    for (double& v : dx) v = -3.0 + 6.0 * U(eng);
    const double dt = 0.05 + 1.95 * U(eng);
    auto d = g.derivatives(dx, dt);
    const double scale = std::max(std::abs(d.time), d.value / dt);
    worst_resid = std::max(worst_resid, std::abs(g.heat_residual(dx, dt)) / scale);
  }

  levi::QuadratureScheme mq;
  mq.spatial_nodes = 48;  // 24 nodes undersample the anisotropic 2-D case
  double tail1 = 0.0, tail2 = 0.0;
  const double mass1 = levi::GenGaussKernel(levi::SpdMatrix(1, {1.3})).mass(0.3, mq, &tail1);
  const double mass2 =
      levi::GenGaussKernel(levi::SpdMatrix(2, {1.0, 0.4, 0.4, 1.0})).mass(0.8, mq, &tail2);
  const double mass_err1 = std::abs(mass1 - 1.0);
  const double mass_err2 = std::abs(mass2 - 1.0);

  // Derivative formulas against finite differences: gradient from values,
  // Hessian from exact gradients, time slope from values.
  double worst_fd = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = (i % 2) + 1;
    levi::SpdMatrix a(n);
    if (n == 1) {
      a.at(0, 0) = 0.6 + 2.0 * U(eng);
    } else {
      a.at(0, 0) = 1.0 + U(eng);
      a.at(1, 1) = 1.0 + U(eng);
      a.at(0, 1) = 0.6 * (U(eng) - 0.5);
      a.at(1, 0) = a.at(0, 1);
    }
    levi::GenGaussKernel g(a);
    std::vector<double> dx(static_cast<size_t>(n));
    for (double& v : dx) {
      const double mag = 0.3 + 1.2 * U(eng);
      v = (U(eng) < 0.5) ? -mag : mag;
    }
    const double dt = 0.3 + 1.2 * U(eng);
    auto d = g.derivatives(dx, dt);
    const double hg = 1e-5;
    for (int c = 0; c < n; ++c) {
      auto p = dx, m = dx;
      p[static_cast<size_t>(c)] += hg;
      m[static_cast<size_t>(c)] -= hg;
      const double fd = (g.value(p, dt) - g.value(m, dt)) / (2.0 * hg);
      worst_fd = std::max(worst_fd, std::abs(d.gradient[static_cast<size_t>(c)] - fd) /
                                        std::abs(d.gradient[static_cast<size_t>(c)]));
    }
    const double hh = 1e-6;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        auto p = dx, m = dx;
        p[static_cast<size_t>(r)] += hh;
        m[static_cast<size_t>(r)] -= hh;
        const double fd = (g.derivatives(p, dt).gradient[static_cast<size_t>(c)] -
                           g.derivatives(m, dt).gradient[static_cast<size_t>(c)]) /
                          (2.0 * hh);
        const double scale = std::max(std::abs(d.hessian.at(r, c)), d.value / dt);
        worst_fd = std::max(worst_fd, std::abs(d.hessian.at(r, c) - fd) / scale);
      }
    }
    const double ht = 1e-5 * dt;
    const double fd_t = (g.value(dx, dt + ht) - g.value(dx, dt - ht)) / (2.0 * ht);
    worst_fd = std::max(worst_fd, std::abs(d.time - fd_t) /
                                      std::max(std::abs(d.time), d.value / dt));
  }

  detail = fmt("residual %.1e, mass err %.1e/%.1e (tails %.0e/%.0e), fd err %.1e", worst_resid,
               mass_err1, mass_err2, tail1, tail2, worst_fd);
  return worst_resid <= 1e-10 && mass_err1 <= 1e-6 && mass_err2 <= 1e-5 && worst_fd <= 1e-6;
}

// ---------------------------------------------------------------------------
// 4. First-correction envelope: |Phi_1| <= C dt^(-n/2-1+beta) e^(-c rho2) at
// 10^4 random queries with gap <= 1 on the resolved mild field.
bool crit_phi1_envelope(std::string& detail) {
  const MildSetup& s = mild_setup();
  levi::Parametrix par(s.field);
  std::mt19937_64 eng(44);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int violations = 0, nonzero = 0;
  double worst_margin = kInf;
  const int nq = 10000;
  for (int i = 0; i < nq; ++i) {
    const double xi = -3.0 + 6.0 * U(eng);
    const double tau = 2.0 * U(eng);
    const double u = U(eng);
    const double dt = std::max((1.0 - u) * (1.0 - u), 1e-12);  // (0, 1], small-gap heavy
    const double z = -4.0 + 8.0 * U(eng);
    auto qy = levi::KernelQuery::from_offsets({xi}, tau, {z * std::sqrt(dt)}, dt);
    const double phi1 = par.first_iterate(qy);
    if (phi1 != 0.0) ++nonzero;
    const double lhs = safe_log(std::abs(phi1));
    const double rhs = levi::log_phi1_envelope(s.k, dt, qy.rho2() / dt);
    if (lhs > rhs + 1e-9) ++violations;
    worst_margin = std::min(worst_margin, rhs - lhs);
  }
  detail = fmt("N1 resolved %.4f; %d violations / %d queries (%d nonzero), min margin %.3f",
               s.n1_resolved, violations, nq, nonzero, worst_margin);
  return violations == 0 && nonzero > nq / 2;
}

// ---------------------------------------------------------------------------
// 5. Correction-series envelopes: per-term and whole-series bounds hold on
// the mild field both across the certified lower-bound window (gaps below
// delta, which is astronomically small here) and across the substantive
// unit-gap regime; the reported factorial-decay tail dominates the directly
// computed next iterate at 100 spot checks.
bool crit_series_envelopes(std::string& detail) {
  const MildSetup& s = mild_setup();
  levi::QuadratureScheme quad;
  quad.spatial_nodes = 14;
  quad.time_nodes = 12;
  quad.spatial_radius_factor = 6.5;
  levi::LeviOptions opt;
  opt.ell_max = 6;
  opt.rho_hint = 2.6;
  opt.grid.time_slices = 28;
  opt.grid.spacing = 0.35;
  opt.grid.halfwidth = 0.0;
  levi::LeviEvaluator ev(s.field, quad, opt);

  std::mt19937_64 eng(55);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double delta_window = std::min(s.k.delta, 1.0);
  int viol_window = 0;
  for (int i = 0; i < 1000; ++i) {
    // The certified window delta is ~1e-238 for this field, so tau must be 0:
    // tau + dt would round back to any positive tau and collapse the gap.
    const double dt = delta_window * std::max(U(eng), 1e-3);
    const double z = -4.0 + 8.0 * U(eng);
    auto qy = levi::KernelQuery::from_offsets({-1.0 + 2.0 * U(eng)}, 0.0,
                                              {z * std::sqrt(dt)}, dt);
    const auto ps = ev.phi_series(qy);
    const double rho2 = qy.rho2() / dt;
    const double lhs = safe_log(std::abs(ps.value));
    if (lhs > levi::log_phi_series_envelope(s.k, dt, rho2) + 1e-9) ++viol_window;
    if (lhs > levi::log_phi1_envelope(s.k, dt, rho2) + 1e-9) ++viol_window;  // one term here
    if (!ps.degenerate_gap) ++viol_window;  // window must sit under the degenerate gap
  }

  // Substantive regime: eight bases, gaps in one chain bucket, offsets within
  // the grid footprint.
  int viol_series = 0;
  double worst_series_margin = kInf;
  for (int i = 0; i < 1000; ++i) {
    const int b = i % 8;
    const double xi = -1.75 + 0.5 * b;
    const double tau = 0.1 * b;
    const double dt = 0.21 + 0.59 * U(eng);
    const double z = -2.4 + 4.8 * U(eng);
    auto qy = levi::KernelQuery::from_offsets({xi}, tau, {z * std::sqrt(dt)}, dt);
    const auto ps = ev.phi_series(qy);
    const double lhs = safe_log(std::abs(ps.value));
    const double rhs = levi::log_phi_series_envelope(s.k, dt, qy.rho2() / dt);
    if (lhs > rhs + 1e-9 || ps.truncation_failure) ++viol_series;
    worst_series_margin = std::min(worst_series_margin, rhs - lhs);
  }

  // Tail dominance: the analytic tail reported after L summed terms must
  // dominate the directly computed iterate L+1 (built without early stopping).
  int viol_tail = 0, viol_term = 0;
  for (int b = 0; b < 2; ++b) {
    const std::vector<double> xi = {b == 0 ? 0.3 : -0.8};
    const double tau = b == 0 ? 0.1 : 0.4;
    // The end time is absolute; queried gaps reach 0.78 past the base.
    const auto grids = ev.levi_iterates(xi, tau, tau + 0.8, opt.ell_max + 1);
    for (int i = 0; i < 50; ++i) {
      const double dt = 0.25 + 0.53 * U(eng);
      const double z = -2.0 + 4.0 * U(eng);
      auto qy = levi::KernelQuery::from_offsets(xi, tau, {z * std::sqrt(dt)}, dt);
      const auto ps = ev.phi_series(qy);
      const int L = ps.terms_used;
      if (L < 1 || L + 1 > static_cast<int>(grids.size())) {
        ++viol_tail;
        continue;
      }
      const double next = std::abs(grids[static_cast<size_t>(L)].raw_value(qy.x(), qy.t()));
      if (safe_log(next) > ps.log_tail_bound + 1e-9) ++viol_tail;
      // Per-term envelope on each directly computed iterate at this query.
      const double rho2 = qy.rho2() / dt;
      for (int l = 1; l <= opt.ell_max + 1; ++l) {
        const double term =
            std::abs(grids[static_cast<size_t>(l - 1)].raw_value(qy.x(), qy.t()));
        if (safe_log(term) > levi::log_phi_ell_envelope(s.k, l, dt, rho2,
                                                        levi::EnvelopeVariant::UniformPower) +
                                 1e-9)
          ++viol_term;
      }
    }
  }

  detail = fmt("window %d, series %d (min margin %.3f), tail %d, per-term %d violations",
               viol_window, viol_series, worst_series_margin, viol_tail, viol_term);
  return viol_window == 0 && viol_series == 0 && viol_tail == 0 && viol_term == 0;
}

// ---------------------------------------------------------------------------
// 6. Two-sided certification: computed values stay between the lower and
// upper envelopes across the certified window on the mild field, and across
// gaps up to 5 (via composition) for constant coefficients, where the values
// must also match the exact kernel.
bool crit_two_sided(std::string& detail) {
  const MildSetup& s = mild_setup();
  levi::LeviEvaluator ev_mild(s.field, levi_test::light_quad(), levi_test::light_levi());
  std::mt19937_64 eng(66);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  std::vector<std::pair<levi::KernelQuery, double>> vals;
  vals.reserve(1000);
  const double window = std::min(s.k.delta, 1.0);
  for (int i = 0; i < 1000; ++i) {
    // tau = 0 keeps tau + dt representable across the whole window (delta is
    // ~1e-238 for this field); the base point still sweeps the region.
    const double dt = window * std::max(U(eng), 1e-3);
    const double z = -4.0 + 8.0 * U(eng);
    auto qy = levi::KernelQuery::from_offsets({-1.5 + 3.0 * U(eng)}, 0.0,
                                              {z * std::sqrt(dt)}, dt);
    vals.emplace_back(qy, ev_mild.evaluate(qy));
  }
  const auto rep_mild = levi::check_two_sided(*s.field, vals, s.k);

  auto cfield = levi_test::const_field(1);
  const auto kc = levi::compute_constants(*cfield);
  levi::QuadratureScheme cq;
  cq.spatial_nodes = 48;  // composition accuracy is set by the per-slice rule
  levi::LeviEvaluator ev_const(cfield, cq, levi::LeviOptions{});
  std::vector<std::pair<levi::KernelQuery, double>> cvals;
  double max_rel = 0.0;
  int composed = 0;
  for (int i = 0; i < 300; ++i) {
    const double dt = 5.0 * (1.0 - U(eng));
    const double z = -4.0 + 8.0 * U(eng);
    auto qy = levi::KernelQuery::from_offsets({-2.0 + 4.0 * U(eng)}, U(eng),
                                              {z * std::sqrt(dt)}, dt);
    const auto res = ev_const.evaluate_full(qy);
    composed += res.diag.composed ? 1 : 0;
    cvals.emplace_back(qy, res.value);
    const double want = levi::gauss_kernel(qy.rho2(), dt, 1);
    max_rel = std::max(max_rel, std::abs(res.value - want) / want);
  }
  const auto rep_const = levi::check_two_sided(*cfield, cvals, kc);

  detail = fmt("mild %d violations (margins %.3f/%.3f); const %d violations, "
               "%d composed, max rel err %.1e",
               rep_mild.violations, rep_mild.worst_margin_low, rep_mild.worst_margin_high,
               rep_const.violations, composed, max_rel);
  return rep_mild.pass() && rep_const.pass() && composed > 0 && max_rel <= 1e-8;
}

// ---------------------------------------------------------------------------
// 7. Constant cross-checks: the lower decay rate from its display form vs the
// pipeline value, the exact upper rate, and the half-budget member of the
// envelope family.
bool crit_constant_consistency(std::string& detail) {
  double worst_d = 0.0;
  for (int n : {1, 2, 3}) {
    for (double kap : {0.5, 1.0}) {
      for (double M : {1.0, 2.0, 4.0}) {
        // The rates under test depend only on (n, kappa, M).  The declared
        // smoothness constants must stay small enough that the series
        // majorant certifies at the roughest corner (n=3, kappa=0.5, M=4),
        // where the growth factor scales like (32 pi M)^(n/2); larger values
        // trigger the deliberate refusal to certify.
        auto f = descriptor_field(n, 1.0, kap, M, 0.003, 0.001);
        const auto k = levi::compute_constants(*f);
        if (k.c != 1.0 / (8.0 * M)) {
          detail = fmt("upper rate mismatch at n=%d M=%g", n, M);
          return false;
        }
        const double disp = levi::lower_rate_from_display(n, kap, M);
        worst_d = std::max(worst_d, std::abs(k.d - disp) / k.d);
      }
    }
  }
  const MildSetup& s = mild_setup();
  const auto eps = levi::epsilon_upper_constants(*s.field, 0.5);
  const bool half_ok = eps.c_eps == 1.0 / (8.0 * s.field->M());
  detail = fmt("lower-rate agreement %.1e over 18 descriptor sets; half-budget rate %s", worst_d,
               half_ok ? "exact" : "WRONG");
  return worst_d <= 1e-12 && half_ok;
}

// ---------------------------------------------------------------------------
// 8. Finite-difference oracle agreement on the mild field at gap 0.25,
// scaled offsets up to 3, within 5% and two minutes.
bool crit_fd_agreement(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const MildSetup& s = mild_setup();

  const std::vector<double> xi = {0.4};
  const double tau = 0.0, t_end = 0.25;
  const std::vector<double> lo = {0.4 - 9.6}, hi = {0.4 + 9.6};
  const int nx = 768, nt = 256;
  const auto fd = levi::fd_solve(*s.field, xi, tau, t_end, lo, hi, nx, nt);

  levi::QuadratureScheme quad;
  quad.spatial_nodes = 16;
  quad.time_nodes = 12;
  quad.spatial_radius_factor = 6.5;
  levi::LeviOptions opt;
  opt.ell_max = 6;
  opt.rho_hint = 3.4;
  opt.grid.time_slices = 32;
  opt.grid.spacing = 0.3;
  opt.grid.halfwidth = 0.0;
  levi::LeviEvaluator ev(s.field, quad, opt);

  std::vector<levi::KernelQuery> queries;
  std::vector<double> cand, ref;
  for (int j = 0; j < 140; ++j) {
    const double off = -1.75 + 3.5 * j / 139.0;
    auto qy = levi::KernelQuery::from_offsets(xi, tau, {off}, t_end - tau);
    queries.push_back(qy);
    cand.push_back(ev.evaluate(qy));
    ref.push_back(fd.value_at(qy.x()));
  }
  levi::CompareFilter filter;
  filter.min_offset = 2.0 * fd.mollification_width();
  filter.rho_max = 3.0;
  const auto cmp = levi::compare(queries, cand, ref, filter);
  const double secs = now_seconds(t0);
  detail = fmt("max rel err %.3f%% over %d used (%d skipped), fd mass %.6f, %.1f s",
               100.0 * cmp.max_rel, cmp.used, cmp.skipped, fd.mass, secs);
  return cmp.max_rel <= 0.05 && cmp.used >= 60 && !fd.leakage_flagged && secs < 120.0;
}

// ---------------------------------------------------------------------------
// 9. Semigroup reproducing identity: integrating the kernel against itself at
// an intermediate time reproduces it — to 1e-6 with constant coefficients,
// to 1e-2 on the mild field at the midpoint.
bool crit_reproducing(std::string& detail) {
  levi::LeviEvaluator ev_const(levi_test::const_field(1));
  const auto qc = levi::KernelQuery::from_offsets({0.0}, 0.0, {0.7}, 0.5);
  const auto rc = ev_const.reproducing_check(qc, 0.25);

  const MildSetup& s = mild_setup();
  levi::QuadratureScheme quad;
  quad.spatial_nodes = 14;
  quad.time_nodes = 11;
  quad.spatial_radius_factor = 6.5;
  levi::LeviOptions opt;
  opt.ell_max = 5;
  opt.rho_hint = 2.6;
  opt.grid.time_slices = 24;
  opt.grid.spacing = 0.4;
  opt.grid.halfwidth = 0.0;
  levi::LeviEvaluator ev_mild(s.field, quad, opt);
  const auto qm = levi::KernelQuery::from_offsets({0.2}, 0.0, {0.5}, 0.4);
  const auto rm = ev_mild.reproducing_check(qm, 0.2);

  detail = fmt("const rel residual %.2e, mild rel residual %.2e", rc.rel_residual,
               rm.rel_residual);
  return rc.rel_residual <= 1e-6 && rm.rel_residual <= 1e-2;
}

// ---------------------------------------------------------------------------
// 10. Sharpened upper envelope, fit-then-verify: prefactor and growth rate
// fitted on training queries of the drift-free mild field, then the envelope
// with the shape exponent (4a+8)/(3a+4) must dominate the computed kernel on
// a disjoint 10^3-query test set spanning gaps up to 3.
bool crit_precise_upper(std::string& detail) {
  const MildSetup& s = mild_setup();
  levi::QuadratureScheme quad;
  quad.spatial_nodes = 14;
  quad.time_nodes = 12;
  quad.spatial_radius_factor = 6.5;
  levi::LeviOptions opt;
  opt.ell_max = 12;
  opt.series_tol = 1e-5;
  opt.chain_tol = 1e-5;
  opt.horizon = 3.0;  // drift-free field: per-term powers hold at every gap
  opt.rho_hint = 2.7;
  opt.grid.time_slices = 32;
  opt.grid.spacing = 0.35;
  opt.grid.halfwidth = 0.0;
  levi::LeviEvaluator ev(s.field, quad, opt);

  const int n = s.field->n();
  const double kap = s.field->kappa(), M = s.field->M(), alpha = s.field->alpha();
  const double gamma = levi::shape_exponent(alpha);
  const double log_base_pref = -0.5 * n * std::log(4.0 * kap * 3.14159265358979323846);

  std::mt19937_64 eng(1010);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int trunc_failures = 0;

  auto run_queries = [&](const std::vector<double>& xi, double tau, double dt_lo, double dt_hi,
                         int count, auto&& sink) {
    for (int i = 0; i < count; ++i) {
      const double dt = dt_lo + (dt_hi - dt_lo) * U(eng);
      const double z = -2.5 + 5.0 * U(eng);
      auto qy = levi::KernelQuery::from_offsets(xi, tau, {z * std::sqrt(dt)}, dt);
      const auto res = ev.evaluate_full(qy);
      if (res.diag.truncation_failure) ++trunc_failures;
      sink(qy, res.value);
    }
  };

  // Fit ln c1 + c2 (dt + rho^gamma) >= ln((E/base - 1) dt^(-alpha/2)) on the
  // training constraints, scanning the rate and taking the tightest prefactor.
  struct FitPoint {
    double r, w;
  };
  std::vector<FitPoint> pts;
  auto train_sink = [&](const levi::KernelQuery& qy, double E) {
    const double dt = qy.dt(), rho2 = qy.rho2() / dt;
    const double log_base = log_base_pref - 0.5 * n * std::log(dt) - rho2 / (4.0 * M);
    const double g = E > 0.0 ? std::exp(std::log(E) - log_base) - 1.0 : -1.0;
    if (g > 1e-13)
      pts.push_back({std::log(g) - 0.5 * alpha * std::log(dt),
                     dt + std::pow(std::sqrt(rho2), gamma)});
  };
  run_queries({0.3}, 0.2, 0.21, 0.79, 130, train_sink);
  run_queries({-0.9}, 0.05, 0.81, 3.0, 150, train_sink);
  run_queries({1.1}, 0.4, 0.051, 0.19, 120, train_sink);

  double c1 = 1e-3, c2 = 0.1;
  if (!pts.empty()) {
    double wbar = 0.0;
    for (const auto& p : pts) wbar += p.w;
    wbar /= static_cast<double>(pts.size());
    double best_score = kInf, best_lnc1 = 0.0, best_c2 = 0.0;
    for (int g2 = 0; g2 <= 60; ++g2) {
      const double c2g = 0.02 * g2;
      double lnc1 = -kInf;
      for (const auto& p : pts) lnc1 = std::max(lnc1, p.r - c2g * p.w);
      const double score = lnc1 + c2g * wbar;
      if (score < best_score) {
        best_score = score;
        best_lnc1 = lnc1;
        best_c2 = c2g;
      }
    }
    c1 = 1.35 * std::exp(best_lnc1);
    c2 = best_c2 + 0.05;
  }

  // Disjoint test set: fresh bases and draws, gaps spanning (0, 3].
  int violations = 0, tested = 0;
  double worst_margin = kInf;
  auto test_sink = [&](const levi::KernelQuery& qy, double E) {
    const double dt = qy.dt(), rho2 = qy.rho2() / dt;
    const double lhs = safe_log(E);
    const double rhs = levi::log_precise_upper_envelope(*s.field, dt, rho2, c1, c2);
    if (lhs > rhs + 1e-9) ++violations;
    worst_margin = std::min(worst_margin, rhs - lhs);
    ++tested;
  };
  run_queries({-1.2}, 0.15, 1e-12, 1e-10, 150, test_sink);
  run_queries({0.7}, 0.0, 0.013, 0.049, 150, test_sink);
  run_queries({1.4}, 0.3, 0.051, 0.19, 200, test_sink);
  run_queries({-0.4}, 0.55, 0.21, 0.79, 250, test_sink);
  run_queries({0.1}, 0.05, 0.81, 3.0, 250, test_sink);

  detail = fmt("fit c1=%.4g c2=%.3f on %zu constraints; %d violations / %d test queries "
               "(min margin %.3f), %d truncation flags",
               c1, c2, pts.size(), violations, tested, worst_margin, trunc_failures);
  return violations == 0 && tested == 1000 && trunc_failures == 0;
}

}  // namespace

int main() {
  struct Row {
    int id;
    const char* name;
    bool (*fn)(std::string&);
  };
  const Row rows[] = {
      {1, "constant-coefficient exactness", crit_constant_exactness},
      {2, "singular-product quadrature sweep", crit_quadrature_sweep},
      {3, "kernel identities", crit_kernel_identities},
      {4, "first-correction envelope", crit_phi1_envelope},
      {5, "correction-series envelopes and tail dominance", crit_series_envelopes},
      {6, "two-sided envelope certification", crit_two_sided},
      {7, "constant cross-checks", crit_constant_consistency},
      {8, "finite-difference oracle agreement", crit_fd_agreement},
      {9, "semigroup reproducing identity", crit_reproducing},
      {10, "sharpened upper envelope fit-then-verify", crit_precise_upper},
  };
  bool all = true;
  for (const Row& row : rows) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ok = row.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
      ok = false;
    }
    std::printf("%s criterion %d: %s [%s; %.1f s]\n", ok ? "PASS" : "FAIL", row.id, row.name,
                detail.c_str(), now_seconds(t0));
    std::fflush(stdout);
    all = all && ok;
  }
  return all ? 0 : 1;
}
