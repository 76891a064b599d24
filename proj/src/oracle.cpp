#include "levi/oracle.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levi {
namespace {

void check_box(const CoefficientField& field, std::span<const double> xi, double tau,
               double t_end, std::span<const double> lo, std::span<const double> hi) {
  const int n = field.n();
  if (static_cast<int>(xi.size()) != n || static_cast<int>(lo.size()) != n ||
      static_cast<int>(hi.size()) != n)
    throw std::invalid_argument("fd_solve: box/source dimension mismatch");
  if (!(t_end > tau)) throw std::invalid_argument("fd_solve: t_end must exceed tau");
  const double margin = 8.0 * std::sqrt(2.0 * field.M() * (t_end - tau));
  for (int i = 0; i < n; ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("fd_solve: empty box");
    if (xi[i] - lo[i] < margin || hi[i] - xi[i] < margin)
      throw std::invalid_argument(
          "fd_solve: source must sit inside the box with margin 8 sqrt(2 M (t_end - tau))");
  }
  if (n == 2 && std::abs((hi[0] - lo[0]) - (hi[1] - lo[1])) > 1e-12 * (hi[0] - lo[0]))
    throw std::invalid_argument("fd_solve: 2-D box must be square (uniform spacing)");
}

// Tensor-Gaussian point mass of width 2h, renormalized to unit discrete mass.
std::vector<double> mollified_delta(std::span<const double> xi, std::span<const double> lo,
                                    int n, int nx, double h) {
  const double w = 2.0 * h;
  const std::size_t nodes = n == 1 ? nx + 1 : static_cast<std::size_t>(nx + 1) * (nx + 1);
  std::vector<double> u(nodes, 0.0);
  double mass = 0.0;
  if (n == 1) {
    for (int i = 0; i <= nx; ++i) {
      double x = lo[0] + i * h;
      u[i] = std::exp(-((x - xi[0]) * (x - xi[0])) / (2.0 * w * w));
      mass += u[i] * h;
    }
  } else {
    for (int i = 0; i <= nx; ++i)
      for (int j = 0; j <= nx; ++j) {
        double x = lo[0] + i * h, y = lo[1] + j * h;
        double g = std::exp(-((x - xi[0]) * (x - xi[0]) + (y - xi[1]) * (y - xi[1])) /
                            (2.0 * w * w));
        u[static_cast<std::size_t>(i) * (nx + 1) + j] = g;
        mass += g * h * h;
      }
  }
  for (double& v : u) v /= mass;
  return u;
}

void thomas_solve(std::vector<double>& sub, std::vector<double>& diag, std::vector<double>& sup,
                  std::vector<double>& rhs) {
  const std::size_t m = diag.size();
  for (std::size_t i = 1; i < m; ++i) {
    double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[m - 1] /= diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

FdSolution fd_solve_1d(const CoefficientField& field, std::span<const double> xi, double tau,
                       double t_end, std::span<const double> lo, std::span<const double> hi,
                       int nx, int nt, double theta) {
  FdSolution sol;
  sol.n = 1;
  sol.lo.assign(lo.begin(), lo.end());
  sol.hi.assign(hi.begin(), hi.end());
  sol.nx = nx;
  sol.h = (hi[0] - lo[0]) / nx;
  sol.tau = tau;
  sol.t_end = t_end;

  const double h = sol.h;
  const double dtau = (t_end - tau) / nt;
  std::vector<double> u = mollified_delta(xi, lo, 1, nx, h);
  u.front() = 0.0;
  u.back() = 0.0;

  const int m = nx - 1;  // interior nodes
  std::vector<double> a_now(m), b_now(m), q_now(m), a_nxt(m), b_nxt(m), q_nxt(m);
  std::vector<double> sub(m), dia(m), sup(m), rhs(m);
  SpdMatrix amat(1);
  auto sample = [&](double t, std::vector<double>& av, std::vector<double>& bv,
                    std::vector<double>& qv) {
    for (int i = 0; i < m; ++i) {
      double x = lo[0] + (i + 1) * h;
      std::span<const double> xs(&x, 1);
      field.a(xs, t, amat);
      av[i] = amat.at(0, 0);
      double bval = 0.0;
      field.b(xs, t, std::span<double>(&bval, 1));
      bv[i] = bval;
      qv[i] = field.q(xs, t);
    }
  };

  sample(tau, a_now, b_now, q_now);
  for (int step = 0; step < nt; ++step) {
    const double t1 = tau + (step + 1) * dtau;
    sample(t1, a_nxt, b_nxt, q_nxt);
    // rhs = (I + (1-theta) dtau A(t0)) u  on interior nodes
    for (int i = 0; i < m; ++i) {
      double uim = i == 0 ? 0.0 : u[i];          // u[(i+1)-1]
      double uip = i == m - 1 ? 0.0 : u[i + 2];  // u[(i+1)+1]
      double uc = u[i + 1];
      double Au = a_now[i] * (uip - 2.0 * uc + uim) / (h * h) +
                  b_now[i] * (uip - uim) / (2.0 * h) + q_now[i] * uc;
      rhs[i] = uc + (1.0 - theta) * dtau * Au;
    }
    // lhs = I - theta dtau A(t1)
    for (int i = 0; i < m; ++i) {
      double diff = a_nxt[i] / (h * h);
      double drift = b_nxt[i] / (2.0 * h);
      sub[i] = -theta * dtau * (diff - drift);
      dia[i] = 1.0 - theta * dtau * (-2.0 * diff + q_nxt[i]);
      sup[i] = -theta * dtau * (diff + drift);
    }
    thomas_solve(sub, dia, sup, rhs);
    for (int i = 0; i < m; ++i) u[i + 1] = rhs[i];
    u.front() = 0.0;
    u.back() = 0.0;
    sol.leakage = std::max(sol.leakage, std::max(std::abs(u[1]), std::abs(u[nx - 1])) * h);
    a_now.swap(a_nxt);
    b_now.swap(b_nxt);
    q_now.swap(q_nxt);
  }
  sol.values = std::move(u);
  sol.mass = 0.0;
  for (double v : sol.values) sol.mass += v * h;
  sol.leakage_flagged = sol.leakage > 1e-6;
  return sol;
}

FdSolution fd_solve_2d(const CoefficientField& field, std::span<const double> xi, double tau,
                       double t_end, std::span<const double> lo, std::span<const double> hi,
                       int nx, int nt, double theta) {
  FdSolution sol;
  sol.n = 2;
  sol.lo.assign(lo.begin(), lo.end());
  sol.hi.assign(hi.begin(), hi.end());
  sol.nx = nx;
  sol.h = (hi[0] - lo[0]) / nx;
  sol.tau = tau;
  sol.t_end = t_end;

  const double h = sol.h;
  const double dtau = (t_end - tau) / nt;
  const int side = nx + 1;
  std::vector<double> u = mollified_delta(xi, lo, 2, nx, h);
  auto node = [side](int i, int j) { return static_cast<std::size_t>(i) * side + j; };
  for (int i = 0; i < side; ++i) {
    u[node(i, 0)] = u[node(i, nx)] = 0.0;
    u[node(0, i)] = u[node(nx, i)] = 0.0;
  }

  const int mi = nx - 1;               // interior nodes per axis
  const int mm = mi * mi;              // interior unknowns
  auto interior = [mi](int i, int j) { return (i - 1) * mi + (j - 1); };

  using Trip = Eigen::Triplet<double>;
  SpdMatrix amat(2);
  std::vector<double> bvec(2);

  // Stencil application of A(t) to the full nodal vector (zero boundary).
  auto apply_A = [&](double t, const std::vector<double>& v, std::vector<double>& out) {
    for (int i = 1; i < nx; ++i)
      for (int j = 1; j < nx; ++j) {
        double xy[2] = {lo[0] + i * h, lo[1] + j * h};
        std::span<const double> xs(xy, 2);
        field.a(xs, t, amat);
        field.b(xs, t, std::span<double>(bvec.data(), 2));
        double qv = field.q(xs, t);
        double c = v[node(i, j)];
        double e = v[node(i + 1, j)], w = v[node(i - 1, j)];
        double nn = v[node(i, j + 1)], s = v[node(i, j - 1)];
        double ne = v[node(i + 1, j + 1)], nw = v[node(i - 1, j + 1)];
        double se = v[node(i + 1, j - 1)], sw = v[node(i - 1, j - 1)];
        double val = amat.at(0, 0) * (e - 2.0 * c + w) / (h * h) +
                     amat.at(1, 1) * (nn - 2.0 * c + s) / (h * h) +
                     2.0 * amat.at(0, 1) * (ne - nw - se + sw) / (4.0 * h * h) +
                     bvec[0] * (e - w) / (2.0 * h) + bvec[1] * (nn - s) / (2.0 * h) + qv * c;
        out[node(i, j)] = val;
      }
  };

  std::vector<double> Au(u.size(), 0.0);
  Eigen::VectorXd rhs(mm), sol_vec(mm);
  for (int step = 0; step < nt; ++step) {
    const double t0 = tau + step * dtau;
    const double t1 = t0 + dtau;
    apply_A(t0, u, Au);
    for (int i = 1; i < nx; ++i)
      for (int j = 1; j < nx; ++j)
        rhs[interior(i, j)] = u[node(i, j)] + (1.0 - theta) * dtau * Au[node(i, j)];

    std::vector<Trip> trips;
    trips.reserve(static_cast<std::size_t>(mm) * 9);
    for (int i = 1; i < nx; ++i)
      for (int j = 1; j < nx; ++j) {
        double xy[2] = {lo[0] + i * h, lo[1] + j * h};
        std::span<const double> xs(xy, 2);
        field.a(xs, t1, amat);
        field.b(xs, t1, std::span<double>(bvec.data(), 2));
        double qv = field.q(xs, t1);
        const int row = interior(i, j);
        const double cxx = amat.at(0, 0) / (h * h);
        const double cyy = amat.at(1, 1) / (h * h);
        const double cxy = 2.0 * amat.at(0, 1) / (4.0 * h * h);
        const double cx = bvec[0] / (2.0 * h);
        const double cy = bvec[1] / (2.0 * h);
        auto add = [&](int ii, int jj, double coeff) {
          if (coeff == 0.0) return;
          if (ii <= 0 || ii >= nx || jj <= 0 || jj >= nx) return;  // zero boundary
          trips.emplace_back(row, interior(ii, jj), -theta * dtau * coeff);
        };
        trips.emplace_back(row, row, 1.0 - theta * dtau * (-2.0 * cxx - 2.0 * cyy + qv));
        add(i + 1, j, cxx + cx);
        add(i - 1, j, cxx - cx);
        add(i, j + 1, cyy + cy);
        add(i, j - 1, cyy - cy);
        add(i + 1, j + 1, cxy);
        add(i - 1, j - 1, cxy);
        add(i + 1, j - 1, -cxy);
        add(i - 1, j + 1, -cxy);
      }
    Eigen::SparseMatrix<double> lhs(mm, mm);
    lhs.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(lhs);
    if (lu.info() != Eigen::Success) throw std::runtime_error("fd_solve: SparseLU failed");
    sol_vec = lu.solve(rhs);
    for (int i = 1; i < nx; ++i)
      for (int j = 1; j < nx; ++j) u[node(i, j)] = sol_vec[interior(i, j)];

    double edge = 0.0;
    for (int i = 1; i < nx; ++i) {
      edge = std::max(edge, std::abs(u[node(i, 1)]));
      edge = std::max(edge, std::abs(u[node(i, nx - 1)]));
      edge = std::max(edge, std::abs(u[node(1, i)]));
      edge = std::max(edge, std::abs(u[node(nx - 1, i)]));
    }
    sol.leakage = std::max(sol.leakage, edge * h * h);
  }
  sol.values = std::move(u);
  sol.mass = 0.0;
  for (double v : sol.values) sol.mass += v * h * h;
  sol.leakage_flagged = sol.leakage > 1e-6;
  return sol;
}

}  // namespace

double exact_constant_kernel(const SpdMatrix& a, std::span<const double> b, double q0,
                             const KernelQuery& qy) {
  const int n = a.dim();
  if (qy.dim() != n || static_cast<int>(b.size()) != n)
    throw std::invalid_argument("exact_constant_kernel: dimension mismatch");
  SpdInverse inv = invert_spd(a);
  GenGaussKernel g(inv.inverse);
  std::vector<double> shift(n);
  for (int i = 0; i < n; ++i) shift[i] = qy.dx()[i] + b[i] * qy.dt();
  return std::exp(q0 * qy.dt()) * g.value(shift, qy.dt());
}

FdSolution fd_solve(const CoefficientField& field, std::span<const double> xi, double tau,
                    double t_end, std::span<const double> lo, std::span<const double> hi, int nx,
                    int nt, double theta) {
  if (theta < 0.5 || theta > 1.0)
    throw std::invalid_argument("fd_solve: theta outside [1/2, 1] rejected (unstable)");
  if (nx < 8 || nt < 1) throw std::invalid_argument("fd_solve: grid too small");
  check_box(field, xi, tau, t_end, lo, hi);
  if (field.n() == 1) return fd_solve_1d(field, xi, tau, t_end, lo, hi, nx, nt, theta);
  if (field.n() == 2) return fd_solve_2d(field, xi, tau, t_end, lo, hi, nx, nt, theta);
  throw std::invalid_argument("fd_solve: only n = 1 and n = 2 are supported");
}

double FdSolution::value_at(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n)
    throw std::invalid_argument("FdSolution::value_at: dimension mismatch");
  if (n == 1) {
    double s = (x[0] - lo[0]) / h;
    if (s < 0.0 || s > nx) throw std::invalid_argument("FdSolution::value_at: outside box");
    int i = std::min(static_cast<int>(s), nx - 1);
    double f = s - i;
    return values[i] * (1.0 - f) + values[i + 1] * f;
  }
  double sx = (x[0] - lo[0]) / h, sy = (x[1] - lo[1]) / h;
  if (sx < 0.0 || sx > nx || sy < 0.0 || sy > nx)
    throw std::invalid_argument("FdSolution::value_at: outside box");
  int i = std::min(static_cast<int>(sx), nx - 1);
  int j = std::min(static_cast<int>(sy), nx - 1);
  double fx = sx - i, fy = sy - j;
  const int side = nx + 1;
  auto v = [&](int ii, int jj) { return values[static_cast<std::size_t>(ii) * side + jj]; };
  return v(i, j) * (1 - fx) * (1 - fy) + v(i + 1, j) * fx * (1 - fy) +
         v(i, j + 1) * (1 - fx) * fy + v(i + 1, j + 1) * fx * fy;
}

OracleComparison compare(const std::vector<KernelQuery>& queries,
                         std::span<const double> candidate, std::span<const double> reference,
                         const CompareFilter& filter) {
  if (queries.size() != candidate.size() || queries.size() != reference.size())
    throw std::invalid_argument("compare: mismatched value counts");
  if (queries.empty()) throw std::invalid_argument("compare: empty query set");
  OracleComparison rep;
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const KernelQuery& q = queries[i];
    double offset = std::sqrt(q.rho2());
    double rho = offset / std::sqrt(q.dt());
    if (offset < filter.min_offset || rho > filter.rho_max || reference[i] == 0.0) {
      ++rep.skipped;
      continue;
    }
    double rel = std::abs(candidate[i] - reference[i]) / std::abs(reference[i]);
    rep.max_rel = std::max(rep.max_rel, rel);
    sum += rel;
    ++rep.used;
  }
  if (rep.used > 0) rep.mean_rel = sum / rep.used;
  return rep;
}

}  // namespace levi
