// Dense symmetric positive-definite matrices in the small dimensions used by
// the coefficient fields (n is typically 1..3, but nothing here caps it).
#pragma once

#include <span>
#include <vector>

namespace levi {

class SpdMatrix {
 public:
  SpdMatrix() : n_(0) {}
  explicit SpdMatrix(int n) : n_(n), e_(static_cast<size_t>(n) * n, 0.0) {}
  SpdMatrix(int n, std::vector<double> entries);

  static SpdMatrix identity(int n);
  static SpdMatrix diagonal(std::span<const double> diag);

  int dim() const { return n_; }
  double& at(int i, int j) { return e_[static_cast<size_t>(i) * n_ + j]; }
  double at(int i, int j) const { return e_[static_cast<size_t>(i) * n_ + j]; }
  const std::vector<double>& entries() const { return e_; }

  bool is_symmetric(double rel_tol = 1e-12) const;

  // y = A x
  void apply(std::span<const double> x, std::span<double> y) const;
  // <A x, x>
  double quadform(std::span<const double> x) const;
  double trace() const;
  double max_abs_entry() const;

 private:
  int n_;
  std::vector<double> e_;
};

// Inverse of an SPD matrix by Cholesky factorization, with a determinant of
// the input as by-product. Rejects non-symmetric input, non-positive pivots,
// and condition estimates beyond cond_limit (eigenvalue ratio, Jacobi).
struct SpdInverse {
  SpdMatrix inverse;
  double det = 0.0;       // det of the input matrix
  double cond = 0.0;      // eigenvalue ratio estimate of the input
};
SpdInverse invert_spd(const SpdMatrix& a, double cond_limit = 1e12);

// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending order.
std::vector<double> symmetric_eigenvalues(const SpdMatrix& a);

}  // namespace levi
