#include "levi/kernels.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace levi {

KernelQuery KernelQuery::from_offsets(std::vector<double> xi, double tau, std::vector<double> dx,
                                      double dt) {
  if (xi.size() != dx.size())
    throw std::invalid_argument("KernelQuery: base point and offset dimensions differ");
  if (xi.empty()) throw std::invalid_argument("KernelQuery: dimension must be >= 1");
  if (!(dt > 0.0)) throw std::domain_error("KernelQuery: time gap must be positive");
  KernelQuery q;
  q.xi_ = std::move(xi);
  q.dx_ = std::move(dx);
  q.tau_ = tau;
  q.dt_ = dt;
  return q;
}

KernelQuery KernelQuery::from_points(std::span<const double> x, double t,
                                     std::span<const double> xi, double tau) {
  std::vector<double> base(xi.begin(), xi.end());
  std::vector<double> dx(x.size());
  if (x.size() != xi.size())
    throw std::invalid_argument("KernelQuery: point dimensions differ");
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] - xi[i];
  return from_offsets(std::move(base), tau, std::move(dx), t - tau);
}

std::vector<double> KernelQuery::x() const {
  std::vector<double> out(xi_.size());
  for (std::size_t i = 0; i < xi_.size(); ++i) out[i] = xi_[i] + dx_[i];
  return out;
}

double KernelQuery::rho2() const {
  double s = 0.0;
  for (double v : dx_) s += v * v;
  return s;
}

double gauss_kernel(double rho2, double dt, int n) {
  if (!(dt > 0.0)) throw std::domain_error("gauss_kernel: time gap must be positive");
  if (rho2 < 0.0) throw std::domain_error("gauss_kernel: squared distance must be >= 0");
  return std::pow(4.0 * M_PI * dt, -0.5 * n) * std::exp(-rho2 / (4.0 * dt));
}

double log_gauss_kernel(double rho2, double dt, int n) {
  if (!(dt > 0.0)) throw std::domain_error("log_gauss_kernel: time gap must be positive");
  if (rho2 < 0.0) throw std::domain_error("log_gauss_kernel: squared distance must be >= 0");
  return -0.5 * n * std::log(4.0 * M_PI * dt) - rho2 / (4.0 * dt);
}

GenGaussKernel::GenGaussKernel(SpdMatrix a) : a_(std::move(a)), a_inv_(a_.dim()) {
  SpdInverse inv = invert_spd(a_);
  a_inv_ = std::move(inv.inverse);
  det_ = inv.det;
  const std::vector<double> eigs = symmetric_eigenvalues(a_);
  eig_min_ = eigs.front();
}

double GenGaussKernel::value(std::span<const double> dx, double dt) const {
  return std::exp(log_value(dx, dt));
}

double GenGaussKernel::log_value(std::span<const double> dx, double dt) const {
  if (!(dt > 0.0)) throw std::domain_error("GenGaussKernel: time gap must be positive");
  if (static_cast<int>(dx.size()) != dim())
    throw std::invalid_argument("GenGaussKernel: offset dimension mismatch");
  const double quad = a_.quadform(dx);
  return 0.5 * std::log(det_) - 0.5 * dim() * std::log(4.0 * M_PI * dt) - quad / (4.0 * dt);
}

GaussDerivatives GenGaussKernel::derivatives(std::span<const double> dx, double dt) const {
  const int n = dim();
  GaussDerivatives out;
  out.value = value(dx, dt);
  out.gradient.assign(static_cast<std::size_t>(n), 0.0);
  out.hessian = SpdMatrix(n);

  std::vector<double> ax(static_cast<std::size_t>(n));
  a_.apply(dx, ax);
  const double quad = a_.quadform(dx);

  for (int k = 0; k < n; ++k)
    out.gradient[static_cast<std::size_t>(k)] = -ax[static_cast<std::size_t>(k)] / (2.0 * dt) * out.value;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double h = (ax[static_cast<std::size_t>(k)] * ax[static_cast<std::size_t>(l)] / (4.0 * dt * dt) -
                        a_.at(k, l) / (2.0 * dt)) *
                       out.value;
      out.hessian.at(k, l) = h;
    }
  out.time = (quad / (4.0 * dt * dt) - 0.5 * n / dt) * out.value;
  return out;
}

double GenGaussKernel::heat_residual(std::span<const double> dx, double dt) const {
  const GaussDerivatives d = derivatives(dx, dt);
  double contracted = 0.0;
  for (int k = 0; k < dim(); ++k)
    for (int l = 0; l < dim(); ++l) contracted += a_inv_.at(k, l) * d.hessian.at(k, l);
  return contracted - d.time;
}

double GenGaussKernel::mass(double dt, const QuadratureScheme& quad, double* tail_bound) const {
  if (!(dt > 0.0)) throw std::domain_error("GenGaussKernel: time gap must be positive");
  const double radius = quad.spatial_radius_factor * std::sqrt(2.0 * dt / eig_min_);
  std::vector<double> center(static_cast<std::size_t>(dim()), 0.0);
  const double total = integrate_box(
      [this, dt](std::span<const double> x) { return value(x, dt); }, center, radius,
      quad.spatial_nodes);
  if (tail_bound != nullptr) {
    // In each eigendirection with eigenvalue lambda the kernel is a centered
    // Gaussian with standard deviation sqrt(2 dt / lambda); the box covers at
    // least radius_factor standard deviations per axis, so a union bound over
    // axes controls the missing tail.
    *tail_bound = dim() * std::erfc(quad.spatial_radius_factor / std::sqrt(2.0));
  }
  return total;
}

}  // namespace levi
