// Coefficient fields for the operator
//   L u = sum_ij a_ij(x,t) d2u/dx_i dx_j + sum_i b_i(x,t) du/dx_i + q(x,t) u - du/dt
// together with the declared structural constants the bound pipeline consumes:
//   n      spatial dimension
//   alpha  parabolic Hölder exponent of a (0 < alpha <= 1)
//   kappa  uniform ellipticity floor:    <a(x,t) eta, eta> >= kappa |eta|^2
//   M      uniform ellipticity ceiling:  <a(x,t) eta, eta> <= M |eta|^2
//   N1     bound on the summed Hölder seminorms of the a_ij
//   N2     bound on sum_i ||b_i||_inf + ||q||_inf
#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "levi/spd.hpp"

namespace levi {

// Axis-aligned sampling region in space-time.
struct Region {
  std::vector<double> x_lo, x_hi;
  double t_lo = 0.0, t_hi = 1.0;
};

class CoefficientField {
 public:
  using MatrixFn = std::function<void(std::span<const double>, double, SpdMatrix&)>;
  using VectorFn = std::function<void(std::span<const double>, double, std::span<double>)>;
  using ScalarFn = std::function<double(std::span<const double>, double)>;

  CoefficientField(int n, double alpha, double kappa, double M, double N1, double N2,
                   MatrixFn a, VectorFn b, ScalarFn q, bool b_is_zero, bool q_is_zero);

  // Constant-coefficient field (N1 = 0; N2 from the declared b, q).
  static CoefficientField constant(SpdMatrix a, std::vector<double> b, double q,
                                   double alpha = 1.0);

  int n() const { return n_; }
  double alpha() const { return alpha_; }
  double kappa() const { return kappa_; }
  double M() const { return M_; }
  double N1() const { return N1_; }
  double N2() const { return N2_; }
  bool b_is_zero() const { return b_zero_; }
  bool q_is_zero() const { return q_zero_; }

  void a(std::span<const double> x, double t, SpdMatrix& out) const { a_(x, t, out); }
  SpdMatrix a(std::span<const double> x, double t) const;
  void b(std::span<const double> x, double t, std::span<double> out) const { b_(x, t, out); }
  double q(std::span<const double> x, double t) const { return q_(x, t); }

  // Frozen-coefficient data at a base point: a(xi,tau), its inverse,
  // determinant of the inverse. Memoized per field (thread-safe); keyed by
  // the exact bit patterns of (xi, tau), which is what repeated grid/query
  // evaluation produces.
  struct Frozen {
    SpdMatrix a;          // a(xi, tau)
    SpdMatrix a_inv;      // a(xi, tau)^-1
    double det_inv = 0.0; // det of the inverse
  };
  std::shared_ptr<const Frozen> frozen(std::span<const double> xi, double tau) const;

 private:
  int n_;
  double alpha_, kappa_, M_, N1_, N2_;
  MatrixFn a_;
  VectorFn b_;
  ScalarFn q_;
  bool b_zero_, q_zero_;
  struct FrozenCache;
  std::shared_ptr<FrozenCache> cache_;
};

// Sampled estimate of the summed parabolic Hölder seminorm of the matrix
// entries: sup over sampled pairs of
//   sum_ij |a_ij(p) - a_ij(p')| / (|x-x'|^2 + |t-t'|)^(alpha/2).
// Pairs are generated at geometric separations 2^-k, k = 0..20, mixing
// axis-aligned and random directions; deterministic in (seed, sample_count)
// and monotone non-decreasing in sample_count for a fixed seed.
struct HolderEstimate {
  double value = 0.0;
  std::vector<double> witness_x, witness_x2;
  double witness_t = 0.0, witness_t2 = 0.0;
};
HolderEstimate estimate_holder_seminorm(const CoefficientField& field, int sample_count,
                                        const Region& region, unsigned long long seed);

// Sampled validation of the declared structural constants. Each check reports
// the worst sampled value against its declared threshold; a tiny relative
// slack absorbs roundoff when an extreme is attained exactly.
struct AssumptionCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // worst sampled value (meaning depends on check)
  double threshold = 0.0;  // declared bound it is compared against
  std::vector<double> witness_x;
  double witness_t = 0.0;
};
struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_pass = false;
};
AssumptionReport validate_assumptions(const CoefficientField& field, const Region& region,
                                      int sample_count, unsigned long long seed);

// Uniform point draw helper shared by the samplers (deterministic per engine).
std::vector<double> uniform_point(const Region& region, std::mt19937_64& eng, double& t_out);

}  // namespace levi
