#include "levi/parametrix.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace levi {

Parametrix::Parametrix(std::shared_ptr<const CoefficientField> field) : field_(std::move(field)) {
  if (!field_) throw std::invalid_argument("Parametrix: null coefficient field");
}

void Parametrix::freeze(const double* xi, double tau, FrozenLocal& out) const {
  const int n = field_->n();
  std::span<const double> xis(xi, static_cast<std::size_t>(n));
  out.a = SpdMatrix(n);
  field_->a(xis, tau, out.a);
  SpdInverse inv = invert_spd(out.a);
  out.a_inv = std::move(inv.inverse);
  out.det_inv = 1.0 / inv.det;
}

double Parametrix::log_value_at(const double* x, double t, const double* xi, double tau) const {
  const int n = field_->n();
  const double dt = t - tau;
  if (!(dt > 0.0)) throw std::domain_error("Parametrix: time gap must be positive");
  FrozenLocal fr;
  freeze(xi, tau, fr);
  double quad = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) quad += fr.a_inv.at(i, j) * (x[i] - xi[i]) * (x[j] - xi[j]);
  return 0.5 * std::log(fr.det_inv) - 0.5 * n * std::log(4.0 * M_PI * dt) - quad / (4.0 * dt);
}

double Parametrix::value_at(const double* x, double t, const double* xi, double tau) const {
  return std::exp(log_value_at(x, t, xi, tau));
}

namespace {

// Shared mismatch kernel: d factors from the frozen inverse, then Psi.
double mismatch_impl(const CoefficientField& field, const SpdMatrix& a_frozen,
                     const SpdMatrix& a_inv, const double* x, double t, const double* xi,
                     double tau, std::vector<double>* d1_out, SpdMatrix* d2_out) {
  const int n = field.n();
  const double dt = t - tau;

  std::vector<double> d1(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += a_inv.at(i, j) * (x[j] - xi[j]);
    d1[static_cast<std::size_t>(i)] = -s / (2.0 * dt);
  }

  std::span<const double> xs(x, static_cast<std::size_t>(n));
  SpdMatrix a_here(n);
  field.a(xs, t, a_here);

  double psi = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dij = -a_inv.at(i, j) / (2.0 * dt) +
                         d1[static_cast<std::size_t>(i)] * d1[static_cast<std::size_t>(j)];
      psi += (a_here.at(i, j) - a_frozen.at(i, j)) * dij;
      if (d2_out != nullptr) d2_out->at(i, j) = dij;
    }

  if (!field.b_is_zero()) {
    std::vector<double> bv(static_cast<std::size_t>(n), 0.0);
    field.b(xs, t, bv);
    for (int i = 0; i < n; ++i) psi += d1[static_cast<std::size_t>(i)] * bv[static_cast<std::size_t>(i)];
  }
  if (!field.q_is_zero()) psi += field.q(xs, t);

  if (d1_out != nullptr) *d1_out = std::move(d1);
  return psi;
}

}  // namespace

double Parametrix::mismatch_at(const double* x, double t, const double* xi, double tau) const {
  if (!(t - tau > 0.0)) throw std::domain_error("Parametrix: time gap must be positive");
  FrozenLocal fr;
  freeze(xi, tau, fr);
  return mismatch_impl(*field_, fr.a, fr.a_inv, x, t, xi, tau, nullptr, nullptr);
}

double Parametrix::first_iterate_at(const double* x, double t, const double* xi, double tau) const {
  if (!(t - tau > 0.0)) throw std::domain_error("Parametrix: time gap must be positive");
  FrozenLocal fr;
  freeze(xi, tau, fr);
  const double psi = mismatch_impl(*field_, fr.a, fr.a_inv, x, t, xi, tau, nullptr, nullptr);
  if (psi == 0.0) return 0.0;
  const int n = field_->n();
  const double dt = t - tau;
  double quad = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) quad += fr.a_inv.at(i, j) * (x[i] - xi[i]) * (x[j] - xi[j]);
  const double logz =
      0.5 * std::log(fr.det_inv) - 0.5 * n * std::log(4.0 * M_PI * dt) - quad / (4.0 * dt);
  return psi * std::exp(logz);
}

double Parametrix::first_iterate_scaled_at(const double* x, double t, const double* xi,
                                           double tau, double time_power) const {
  const double dt = t - tau;
  if (!(dt > 0.0)) throw std::domain_error("Parametrix: time gap must be positive");
  FrozenLocal fr;
  freeze(xi, tau, fr);
  const int n = field_->n();

  // The mismatch factor is a polynomial in 1/dt:
  //   Psi = P2/dt^2 + (P1 + Pb)/dt + P0
  // with O(1) coefficients (s = a_inv (x - xi), inc = a(x,t) - a(xi,tau)):
  //   P2 = sum_ij inc_ij s_i s_j / 4,  P1 = -sum_ij inc_ij a_inv_ij / 2,
  //   Pb = -sum_i b_i s_i / 2,         P0 = q.
  // Forming Psi directly would overflow near dt ~ 1e-200 even though the
  // Gaussian factor sends the product to zero, so each power of 1/dt is
  // folded into the exponent instead.
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    double si = 0.0;
    for (int j = 0; j < n; ++j) si += fr.a_inv.at(i, j) * (x[j] - xi[j]);
    s[static_cast<std::size_t>(i)] = si;
    quad += si * (x[i] - xi[i]);
  }

  std::span<const double> xs(x, static_cast<std::size_t>(n));
  SpdMatrix a_here(n);
  field_->a(xs, t, a_here);
  double p2 = 0.0, p1 = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double inc = a_here.at(i, j) - fr.a.at(i, j);
      p2 += inc * s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)] / 4.0;
      p1 -= inc * fr.a_inv.at(i, j) / 2.0;
    }
  if (!field_->b_is_zero()) {
    std::vector<double> bv(static_cast<std::size_t>(n), 0.0);
    field_->b(xs, t, bv);
    for (int i = 0; i < n; ++i) p1 -= bv[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(i)] / 2.0;
  }
  const double p0 = field_->q_is_zero() ? 0.0 : field_->q(xs, t);

  const double logz =
      0.5 * std::log(fr.det_inv) - 0.5 * n * std::log(4.0 * M_PI * dt) - quad / (4.0 * dt);
  const double ldt = std::log(dt);
  auto term = [&](double coeff, int inv_dt_power) {
    if (coeff == 0.0) return 0.0;
    const double mag = std::exp(std::log(std::abs(coeff)) + logz + (time_power - inv_dt_power) * ldt);
    return coeff > 0.0 ? mag : -mag;
  };
  return term(p2, 2) + term(p1, 1) + term(p0, 0);
}

double Parametrix::value(const KernelQuery& q) const {
  const std::vector<double> x = q.x();
  return value_at(x.data(), q.t(), q.xi().data(), q.tau());
}

double Parametrix::log_value(const KernelQuery& q) const {
  const std::vector<double> x = q.x();
  return log_value_at(x.data(), q.t(), q.xi().data(), q.tau());
}

double Parametrix::mismatch(const KernelQuery& q) const {
  const std::vector<double> x = q.x();
  return mismatch_at(x.data(), q.t(), q.xi().data(), q.tau());
}

double Parametrix::first_iterate(const KernelQuery& q) const {
  const std::vector<double> x = q.x();
  return first_iterate_at(x.data(), q.t(), q.xi().data(), q.tau());
}

DerivativeFactors Parametrix::derivative_factors(const KernelQuery& q) const {
  const std::vector<double> x = q.x();
  FrozenLocal fr;
  freeze(q.xi().data(), q.tau(), fr);
  DerivativeFactors out;
  out.d2 = SpdMatrix(field_->n());
  mismatch_impl(*field_, fr.a, fr.a_inv, x.data(), q.t(), q.xi().data(), q.tau(), &out.d1,
                &out.d2);
  return out;
}

bool Parametrix::residual_vanishes() const {
  return field_->N1() == 0.0 && field_->b_is_zero() && field_->q_is_zero();
}

}  // namespace levi
