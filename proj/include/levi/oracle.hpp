// Independent reference solutions: the closed-form constant-coefficient
// kernel and a theta-scheme finite-difference initial-value solver, plus the
// comparison report between a candidate kernel and a reference.
//
// These paths share no code with the parametrix construction (different
// discretization, different analytic form), which is what makes the agreement
// checks meaningful.
#pragma once

#include <span>
#include <vector>

#include "levi/coeffs.hpp"
#include "levi/kernels.hpp"
#include "levi/spd.hpp"

namespace levi {

// Exact fundamental solution of the frozen operator
//   u_t = sum a_ij d2_ij u + sum b_i d_i u + q0 u  (all coefficients constant):
//   E = e^(q0 dt) sqrt(det a^{-1}) (4 pi dt)^(-n/2)
//       exp(-<a^{-1} s, s>/(4 dt)),   s = dx + b dt.
double exact_constant_kernel(const SpdMatrix& a, std::span<const double> b, double q0,
                             const KernelQuery& qy);

// Dense nodal solution of the forward problem on a box with zero boundary
// values, started from a mollified point mass at xi.
struct FdSolution {
  int n = 1;
  std::vector<double> lo, hi;     // box corners
  int nx = 0;                     // cells per axis (nx+1 nodes per axis)
  double h = 0.0;                 // node spacing (equal on every axis)
  double tau = 0.0, t_end = 0.0;
  std::vector<double> values;     // final-time nodal values (x-major for n=2)
  double mass = 0.0;              // discrete integral of the final solution
  double leakage = 0.0;           // worst boundary-adjacent cell mass seen
  bool leakage_flagged = false;   // leakage above 1e-6

  // Multilinear interpolation; x must lie inside the box.
  double value_at(std::span<const double> x) const;
  // Width of the initial mollified point mass (2 grid cells).
  double mollification_width() const { return 2.0 * h; }
};

// theta = 1/2 is Crank-Nicolson; theta in [1/2, 1] accepted (smaller values
// are rejected as unconditionally unstable for this use). The box must
// contain xi with margin >= 8 sqrt(2 M (t_end - tau)) on every side so the
// zero boundary is negligible. n = 1 solves tridiagonal systems; n = 2
// assembles the 9-point stencil (4-point cross for the mixed term) and
// factorizes with SparseLU each step.
FdSolution fd_solve(const CoefficientField& field, std::span<const double> xi, double tau,
                    double t_end, std::span<const double> lo, std::span<const double> hi, int nx,
                    int nt, double theta = 0.5);

// Relative-error report between candidate and reference values on a common
// query set. Queries with |dx| < min_offset (mollification-dominated) or
// scaled offset rho > rho_max (both values at the noise floor) are skipped,
// as are queries whose reference value is exactly zero.
struct CompareFilter {
  double min_offset = 0.0;
  double rho_max = 3.0;
};
struct OracleComparison {
  double max_rel = 0.0;
  double mean_rel = 0.0;
  int used = 0;
  int skipped = 0;
};
OracleComparison compare(const std::vector<KernelQuery>& queries,
                         std::span<const double> candidate, std::span<const double> reference,
                         const CompareFilter& filter = {});

}  // namespace levi
