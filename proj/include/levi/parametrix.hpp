// Frozen-coefficient Gaussian approximation Z of the fundamental solution,
// its derivative factors, and the residual left when the full operator is
// applied to it:
//   Z(x,t; xi,tau) = sqrt(det a^{-1}(xi,tau)) (4 pi (t-tau))^(-n/2)
//                    exp(-<a^{-1}(xi,tau)(x-xi), x-xi> / (4(t-tau))),
//   d_i  = -(1/(2(t-tau))) sum_j a^{ij}(xi,tau) (x_j - xi_j),
//   d_ij = -a^{ij}(xi,tau)/(2(t-tau)) + d_i d_j,
//   grad Z = d * Z,   hess Z = (d_ij) * Z,
//   L Z = Psi Z with
//   Psi = sum_ij (a_ij(x,t) - a_ij(xi,tau)) d_ij + sum_i d_i b_i(x,t) + q(x,t).
// Psi Z is the first kernel of the correction series built in the iteration
// module.
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "levi/coeffs.hpp"
#include "levi/kernels.hpp"
#include "levi/spd.hpp"

namespace levi {

// First- and second-derivative factors of Z at one query.
struct DerivativeFactors {
  std::vector<double> d1;
  SpdMatrix d2{1};
};

class Parametrix {
 public:
  explicit Parametrix(std::shared_ptr<const CoefficientField> field);

  const CoefficientField& field() const { return *field_; }
  const std::shared_ptr<const CoefficientField>& field_ptr() const { return field_; }

  // Raw-pointer entry points used inside quadrature loops (no allocation).
  double log_value_at(const double* x, double t, const double* xi, double tau) const;
  double value_at(const double* x, double t, const double* xi, double tau) const;
  double mismatch_at(const double* x, double t, const double* xi, double tau) const;
  double first_iterate_at(const double* x, double t, const double* xi, double tau) const;
  // (Psi Z) * (t-tau)^time_power evaluated via logs: finite even where the
  // unscaled product would overflow (time gaps down to ~1e-300 occur when the
  // certified lower-bound window delta is tiny).
  double first_iterate_scaled_at(const double* x, double t, const double* xi, double tau,
                                 double time_power) const;

  // Query-object wrappers.
  double value(const KernelQuery& q) const;
  double log_value(const KernelQuery& q) const;
  double mismatch(const KernelQuery& q) const;
  double first_iterate(const KernelQuery& q) const;
  DerivativeFactors derivative_factors(const KernelQuery& q) const;

  // True iff the residual factor vanishes identically (constant a, b = q = 0),
  // which forces the whole correction series to vanish and E = Z exactly.
  bool residual_vanishes() const;

 private:
  struct FrozenLocal {
    SpdMatrix a;
    SpdMatrix a_inv;
    double det_inv = 0.0;
  };
  void freeze(const double* xi, double tau, FrozenLocal& out) const;

  std::shared_ptr<const CoefficientField> field_;
};

}  // namespace levi
