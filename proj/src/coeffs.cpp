#include "levi/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>

namespace levi {

namespace {

// Bit-pattern hash of a base point; exact-key memoization is what repeated
// evaluation at grid nodes produces.
struct BaseKey {
  std::vector<double> xi;
  double tau;
  bool operator==(const BaseKey& o) const { return tau == o.tau && xi == o.xi; }
};

struct BaseKeyHash {
  size_t operator()(const BaseKey& k) const {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    auto mix = [&h](double v) {
      uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h ^= bits + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(k.tau);
    for (double v : k.xi) mix(v);
    return static_cast<size_t>(h);
  }
};

constexpr size_t kFrozenCacheCap = 8192;

}  // namespace

struct CoefficientField::FrozenCache {
  mutable std::shared_mutex mu;
  std::unordered_map<BaseKey, std::shared_ptr<const Frozen>, BaseKeyHash> map;
};

CoefficientField::CoefficientField(int n, double alpha, double kappa, double M, double N1,
                                   double N2, MatrixFn a, VectorFn b, ScalarFn q,
                                   bool b_is_zero, bool q_is_zero)
    : n_(n),
      alpha_(alpha),
      kappa_(kappa),
      M_(M),
      N1_(N1),
      N2_(N2),
      a_(std::move(a)),
      b_(std::move(b)),
      q_(std::move(q)),
      b_zero_(b_is_zero),
      q_zero_(q_is_zero),
      cache_(std::make_shared<FrozenCache>()) {
  if (n < 1) throw std::invalid_argument("CoefficientField: n must be >= 1");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("CoefficientField: alpha must be in (0, 1]");
  if (!(kappa > 0.0) || !(M >= kappa))
    throw std::invalid_argument("CoefficientField: need 0 < kappa <= M");
  if (N1 < 0.0 || N2 < 0.0)
    throw std::invalid_argument("CoefficientField: N1, N2 must be >= 0");
}

CoefficientField CoefficientField::constant(SpdMatrix a, std::vector<double> b, double q,
                                            double alpha) {
  const int n = a.dim();
  if (static_cast<int>(b.size()) != n)
    throw std::invalid_argument("CoefficientField::constant: drift size mismatch");
  const std::vector<double> eig = symmetric_eigenvalues(a);
  if (!(eig.front() > 0.0))
    throw std::invalid_argument("CoefficientField::constant: matrix not positive definite");
  double n2 = std::abs(q);
  bool b_zero = true;
  for (double bi : b) {
    n2 += std::abs(bi);
    b_zero = b_zero && bi == 0.0;
  }
  const bool q_zero = q == 0.0;
  auto a_fn = [a](std::span<const double>, double, SpdMatrix& out) { out = a; };
  auto b_fn = [b](std::span<const double>, double, std::span<double> out) {
    std::copy(b.begin(), b.end(), out.begin());
  };
  auto q_fn = [q](std::span<const double>, double) { return q; };
  return CoefficientField(n, alpha, eig.front(), eig.back(), /*N1=*/0.0, n2,
                          std::move(a_fn), std::move(b_fn), std::move(q_fn), b_zero, q_zero);
}

SpdMatrix CoefficientField::a(std::span<const double> x, double t) const {
  SpdMatrix out(n_);
  a_(x, t, out);
  return out;
}

std::shared_ptr<const CoefficientField::Frozen> CoefficientField::frozen(
    std::span<const double> xi, double tau) const {
  BaseKey key{std::vector<double>(xi.begin(), xi.end()), tau};
  {
    std::shared_lock lock(cache_->mu);
    auto it = cache_->map.find(key);
    if (it != cache_->map.end()) return it->second;
  }
  auto f = std::make_shared<Frozen>();
  f->a = a(xi, tau);
  SpdInverse inv = invert_spd(f->a);
  f->a_inv = std::move(inv.inverse);
  f->det_inv = 1.0 / inv.det;
  {
    std::unique_lock lock(cache_->mu);
    if (cache_->map.size() >= kFrozenCacheCap) cache_->map.clear();
    cache_->map.emplace(std::move(key), f);
  }
  return f;
}

std::vector<double> uniform_point(const Region& region, std::mt19937_64& eng, double& t_out) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> x(region.x_lo.size());
  for (size_t i = 0; i < x.size(); ++i)
    x[i] = region.x_lo[i] + (region.x_hi[i] - region.x_lo[i]) * u01(eng);
  t_out = region.t_lo + (region.t_hi - region.t_lo) * u01(eng);
  return x;
}

namespace {

double clamp_to(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Parabolic distance power: (|dx|^2 + |dt|)^(alpha/2).
double parabolic_dist_pow(std::span<const double> dx, double dt, double alpha) {
  double s = std::abs(dt);
  for (double d : dx) s += d * d;
  return std::pow(s, 0.5 * alpha);
}

double entry_l1_diff(const SpdMatrix& a, const SpdMatrix& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) s += std::abs(a.at(i, j) - b.at(i, j));
  return s;
}

}  // namespace

HolderEstimate estimate_holder_seminorm(const CoefficientField& field, int sample_count,
                                        const Region& region, unsigned long long seed) {
  const int n = field.n();
  if (static_cast<int>(region.x_lo.size()) != n || static_cast<int>(region.x_hi.size()) != n)
    throw std::invalid_argument("estimate_holder_seminorm: region dimension mismatch");

  HolderEstimate best;
  SpdMatrix a1(n), a2(n);
  std::vector<double> x2(n), dx(n);
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int s = 0; s < sample_count; ++s) {
    double t1;
    std::vector<double> x1 = uniform_point(region, eng, t1);
    const int k = s % 21;               // geometric separation scale 2^-k
    const double h = std::ldexp(1.0, -k);
    const int mode = (s / 21) % (n + 2);  // axis-aligned spatial, pure time, random

    double dt = 0.0;
    std::fill(dx.begin(), dx.end(), 0.0);
    if (mode < n) {
      dx[mode] = h;
    } else if (mode == n) {
      dt = h * h;
    } else {
      double norm2 = 0.0;
      for (int i = 0; i < n; ++i) {
        dx[i] = gauss(eng);
        norm2 += dx[i] * dx[i];
      }
      const double wt = gauss(eng);
      const double norm = std::sqrt(norm2 + wt * wt) + 1e-300;
      for (int i = 0; i < n; ++i) dx[i] *= h / norm;
      dt = h * h * wt / norm;  // time displacement scales parabolically
    }

    double t2 = clamp_to(t1 + dt, region.t_lo, region.t_hi);
    for (int i = 0; i < n; ++i)
      x2[i] = clamp_to(x1[i] + dx[i], region.x_lo[i], region.x_hi[i]);

    // Recompute the actual displacement after clamping.
    double dist2 = std::abs(t2 - t1);
    for (int i = 0; i < n; ++i) dist2 += (x2[i] - x1[i]) * (x2[i] - x1[i]);
    if (dist2 <= 0.0) continue;

    field.a(x1, t1, a1);
    field.a(x2, t2, a2);
    const double quot =
        entry_l1_diff(a1, a2) / std::pow(dist2, 0.5 * field.alpha());
    if (quot > best.value) {
      best.value = quot;
      best.witness_x = x1;
      best.witness_x2.assign(x2.begin(), x2.end());
      best.witness_t = t1;
      best.witness_t2 = t2;
    }
  }
  return best;
}

AssumptionReport validate_assumptions(const CoefficientField& field, const Region& region,
                                      int sample_count, unsigned long long seed) {
  const int n = field.n();
  AssumptionReport report;
  // Slack absorbs roundoff when a declared extreme is attained exactly.
  const auto passes = [](double worst, double threshold) {
    return worst <= threshold * (1.0 + 1e-9) + 1e-12;
  };

  std::mt19937_64 eng(seed ^ 0x5bf0aull);
  SpdMatrix a(n);
  std::vector<double> b(n);

  AssumptionCheck ell_lo{"ellipticity_floor", true, 1e300, field.kappa(), {}, 0.0};
  AssumptionCheck ell_hi{"ellipticity_ceiling", true, 0.0, field.M(), {}, 0.0};
  AssumptionCheck symm{"symmetry", true, 0.0, 0.0, {}, 0.0};
  AssumptionCheck finite{"finite_continuous_entries", true, 0.0, 0.0, {}, 0.0};
  AssumptionCheck lower_norm{"lower_order_sup_norm", true, 0.0, field.N2(), {}, 0.0};

  for (int s = 0; s < sample_count; ++s) {
    double t;
    std::vector<double> x = uniform_point(region, eng, t);
    field.a(x, t, a);

    bool all_finite = true;
    for (double v : a.entries()) all_finite = all_finite && std::isfinite(v);
    if (!all_finite) {
      finite.pass = false;
      finite.witness_x = x;
      finite.witness_t = t;
      continue;
    }
    if (!a.is_symmetric(1e-10)) {
      symm.pass = false;
      symm.witness_x = x;
      symm.witness_t = t;
    }
    const std::vector<double> eig = symmetric_eigenvalues(a);
    if (eig.front() < ell_lo.worst) {
      ell_lo.worst = eig.front();
      ell_lo.witness_x = x;
      ell_lo.witness_t = t;
    }
    if (eig.back() > ell_hi.worst) {
      ell_hi.worst = eig.back();
      ell_hi.witness_x = x;
      ell_hi.witness_t = t;
    }

    field.b(x, t, b);
    double lo = std::abs(field.q(x, t));
    for (double bi : b) lo += std::abs(bi);
    if (!std::isfinite(lo)) {
      finite.pass = false;
      finite.witness_x = x;
      finite.witness_t = t;
    } else if (lo > lower_norm.worst) {
      lower_norm.worst = lo;
      lower_norm.witness_x = x;
      lower_norm.witness_t = t;
    }
  }
  // Floor check compares from below: worst is the smallest eigenvalue seen.
  ell_lo.pass = ell_lo.worst >= field.kappa() * (1.0 - 1e-9) - 1e-12;
  ell_hi.pass = passes(ell_hi.worst, field.M());
  lower_norm.pass = passes(lower_norm.worst, field.N2());

  AssumptionCheck holder{"holder_seminorm_sum", true, 0.0, field.N1(), {}, 0.0};
  HolderEstimate est = estimate_holder_seminorm(field, sample_count, region, seed ^ 0x77cbull);
  holder.worst = est.value;
  holder.pass = passes(est.value, field.N1());
  if (!est.witness_x.empty()) {
    holder.witness_x = est.witness_x;
    holder.witness_t = est.witness_t;
  }

  // Lower-order Hölder continuity is only checked for finiteness by sampling;
  // the sampled quotients of continuous data are always finite, so this check
  // records the largest quotient seen and passes unless something was NaN/inf.
  AssumptionCheck lower_holder{"lower_order_holder_finite", true, 0.0, 0.0, {}, 0.0};
  {
    std::mt19937_64 eng2(seed ^ 0x91e2ull);
    std::vector<double> b1(n), b2(n), x2(n);
    for (int s = 0; s < std::min(sample_count, 2000); ++s) {
      double t1;
      std::vector<double> x1 = uniform_point(region, eng2, t1);
      const double h = std::ldexp(1.0, -(s % 21));
      for (int i = 0; i < n; ++i)
        x2[i] = clamp_to(x1[i] + ((i == s % n) ? h : 0.0), region.x_lo[i], region.x_hi[i]);
      const double t2 = clamp_to(t1 + h * h, region.t_lo, region.t_hi);
      field.b(x1, t1, b1);
      field.b(x2, t2, b2);
      double diff = std::abs(field.q(x1, t1) - field.q(x2, t2));
      for (int i = 0; i < n; ++i) diff += std::abs(b1[i] - b2[i]);
      double dist2 = std::abs(t2 - t1);
      for (int i = 0; i < n; ++i) dist2 += (x2[i] - x1[i]) * (x2[i] - x1[i]);
      if (dist2 <= 0.0) continue;
      const double quot = diff / std::pow(dist2, 0.5 * field.alpha());
      if (!std::isfinite(quot)) {
        lower_holder.pass = false;
        lower_holder.witness_x = x1;
        lower_holder.witness_t = t1;
      }
      lower_holder.worst = std::max(lower_holder.worst, quot);
    }
    lower_holder.threshold = lower_holder.worst;  // informational only
  }

  report.checks = {symm, finite, ell_lo, ell_hi, holder, lower_norm, lower_holder};
  report.all_pass = true;
  for (const auto& c : report.checks) report.all_pass = report.all_pass && c.pass;
  return report;
}

}  // namespace levi
