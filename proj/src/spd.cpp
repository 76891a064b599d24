#include "levi/spd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levi {

SpdMatrix::SpdMatrix(int n, std::vector<double> entries) : n_(n), e_(std::move(entries)) {
  if (e_.size() != static_cast<size_t>(n) * n)
    throw std::invalid_argument("SpdMatrix: entry count does not match dimension");
}

SpdMatrix SpdMatrix::identity(int n) {
  SpdMatrix m(n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

SpdMatrix SpdMatrix::diagonal(std::span<const double> diag) {
  SpdMatrix m(static_cast<int>(diag.size()));
  for (int i = 0; i < m.dim(); ++i) m.at(i, i) = diag[i];
  return m;
}

bool SpdMatrix::is_symmetric(double rel_tol) const {
  const double scale = std::max(max_abs_entry(), 1e-300);
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (std::abs(at(i, j) - at(j, i)) > rel_tol * scale) return false;
  return true;
}

void SpdMatrix::apply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += at(i, j) * x[j];
    y[i] = s;
  }
}

double SpdMatrix::quadform(std::span<const double> x) const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_; ++j) row += at(i, j) * x[j];
    s += row * x[i];
  }
  return s;
}

double SpdMatrix::trace() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) s += at(i, i);
  return s;
}

double SpdMatrix::max_abs_entry() const {
  double m = 0.0;
  for (double v : e_) m = std::max(m, std::abs(v));
  return m;
}

namespace {

// Lower Cholesky factor; throws on a non-positive pivot.
std::vector<double> cholesky_lower(const SpdMatrix& a) {
  const int n = a.dim();
  std::vector<double> l(static_cast<size_t>(n) * n, 0.0);
  auto L = [&](int i, int j) -> double& { return l[static_cast<size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0.0))
          throw std::domain_error("invert_spd: matrix is not positive definite");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  return l;
}

}  // namespace

SpdInverse invert_spd(const SpdMatrix& a, double cond_limit) {
  const int n = a.dim();
  if (n <= 0) throw std::invalid_argument("invert_spd: empty matrix");
  if (!a.is_symmetric())
    throw std::domain_error("invert_spd: matrix is not symmetric");

  const std::vector<double> l = cholesky_lower(a);
  auto L = [&](int i, int j) { return l[static_cast<size_t>(i) * n + j]; };

  double det = 1.0;
  for (int i = 0; i < n; ++i) det *= L(i, i) * L(i, i);

  // inv = L^-T L^-1, column by column.
  SpdInverse out;
  out.inverse = SpdMatrix(n);
  std::vector<double> col(n);
  for (int c = 0; c < n; ++c) {
    // forward solve L y = e_c
    for (int i = 0; i < n; ++i) {
      double s = (i == c) ? 1.0 : 0.0;
      for (int k = 0; k < i; ++k) s -= L(i, k) * col[k];
      col[i] = s / L(i, i);
    }
    // back solve L^T x = y
    for (int i = n - 1; i >= 0; --i) {
      double s = col[i];
      for (int k = i + 1; k < n; ++k) s -= L(k, i) * col[k];
      col[i] = s / L(i, i);
    }
    for (int r = 0; r < n; ++r) out.inverse.at(r, c) = col[r];
  }
  // Symmetrize away rounding skew.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = 0.5 * (out.inverse.at(i, j) + out.inverse.at(j, i));
      out.inverse.at(i, j) = v;
      out.inverse.at(j, i) = v;
    }

  out.det = det;
  const std::vector<double> eig = symmetric_eigenvalues(a);
  out.cond = eig.back() / std::max(eig.front(), 1e-300);
  if (!(eig.front() > 0.0) || out.cond > cond_limit)
    throw std::domain_error("invert_spd: condition estimate exceeds limit");
  return out;
}

std::vector<double> symmetric_eigenvalues(const SpdMatrix& a) {
  const int n = a.dim();
  SpdMatrix m = a;
  // Cyclic Jacobi sweeps; plenty for the small dimensions in play.
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += m.at(p, q) * m.at(p, q);
    if (off < 1e-30 * std::max(1.0, m.max_abs_entry() * m.max_abs_entry())) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (int k = 0; k < n; ++k) {
          const double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (int i = 0; i < n; ++i) eig[i] = m.at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace levi
