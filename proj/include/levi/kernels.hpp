// Gaussian kernels with a frozen SPD matrix in the exponent, their closed-form
// derivatives, and numeric sanity checks (heat identity residual, total mass).
//
// The central object is
//   G_A(x, t) = sqrt(det A) (4 pi t)^(-n/2) exp(-<A x, x> / (4 t)),   t > 0,
// which integrates to 1 over R^n for every SPD matrix A and solves
//   sum_kl (A^{-1})_kl d^2/dx_k dx_l G_A = d/dt G_A.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "levi/quadrature.hpp"
#include "levi/spd.hpp"

namespace levi {

// Evaluation point for kernels anchored at a base (xi, tau). Offsets are the
// primary representation: near-degenerate time gaps (dt of order 1e-200 are
// meaningful here) and the matching tiny spatial offsets are representable as
// offsets but would round to zero if stored as absolute coordinates.
class KernelQuery {
 public:
  static KernelQuery from_offsets(std::vector<double> xi, double tau, std::vector<double> dx,
                                  double dt);
  static KernelQuery from_points(std::span<const double> x, double t,
                                 std::span<const double> xi, double tau);

  int dim() const { return static_cast<int>(xi_.size()); }
  const std::vector<double>& xi() const { return xi_; }
  double tau() const { return tau_; }
  const std::vector<double>& dx() const { return dx_; }
  double dt() const { return dt_; }
  std::vector<double> x() const;
  double t() const { return tau_ + dt_; }
  // Squared Euclidean length of the spatial offset.
  double rho2() const;

 private:
  KernelQuery() = default;
  std::vector<double> xi_;
  std::vector<double> dx_;
  double tau_ = 0.0;
  double dt_ = 0.0;
};

// Scalar heat kernel value (4 pi dt)^(-n/2) exp(-rho2 / (4 dt)) for squared
// distance rho2 >= 0. The building block of every envelope in the bounds module.
double gauss_kernel(double rho2, double dt, int n);
// log of the above; safe where the value itself underflows.
double log_gauss_kernel(double rho2, double dt, int n);

// Value, spatial gradient, spatial Hessian, and time derivative of G_A at one
// point, all sharing the common factor G_A(x, t).
struct GaussDerivatives {
  double value = 0.0;
  std::vector<double> gradient;
  SpdMatrix hessian{1};
  double time = 0.0;
};

class GenGaussKernel {
 public:
  // `a` is the SPD matrix in the exponent. Its inverse and determinant are
  // computed once here.
  explicit GenGaussKernel(SpdMatrix a);

  int dim() const { return a_.dim(); }
  const SpdMatrix& matrix() const { return a_; }
  const SpdMatrix& inverse() const { return a_inv_; }
  double det() const { return det_; }

  double value(std::span<const double> dx, double dt) const;
  double log_value(std::span<const double> dx, double dt) const;
  GaussDerivatives derivatives(std::span<const double> dx, double dt) const;

  // sum_kl (A^{-1})_kl Hessian_kl - time derivative, evaluated from the
  // closed-form pieces. Exactly zero in real arithmetic; rounding-level in
  // floating point.
  double heat_residual(std::span<const double> dx, double dt) const;

  // Numeric integral of G_A(., dt) over the box of half-width
  // radius_factor * sqrt(2 dt / lambda_min(A)) per axis. Should be 1 up to the
  // Gaussian tail outside the box; *tail_bound (if given) receives a rigorous
  // upper bound on that missing tail.
  double mass(double dt, const QuadratureScheme& quad, double* tail_bound = nullptr) const;

 private:
  SpdMatrix a_;
  SpdMatrix a_inv_;
  double det_ = 0.0;
  double eig_min_ = 0.0;
};

}  // namespace levi
