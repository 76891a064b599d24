#include "levi/iteration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "levi/special.hpp"

namespace levi {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sqr(double x) { return x * x; }

void require_same_base(const GridKernel& g, const KernelQuery& qy) {
  if (g.dim() != qy.dim())
    throw std::invalid_argument("spacetime_convolve: grid/query dimension mismatch");
  if (g.tau() != qy.tau())
    throw std::invalid_argument("spacetime_convolve: grid and query anchor different times");
  for (int i = 0; i < g.dim(); ++i)
    if (g.base()[i] != qy.xi()[i])
      throw std::invalid_argument("spacetime_convolve: grid and query anchor different bases");
}

[[noreturn]] void throw_nonfinite(const double* eta, int n, double sigma, double fv, double gv) {
  std::ostringstream os;
  os << "spacetime_convolve: non-finite integrand sample at eta = (";
  for (int i = 0; i < n; ++i) os << (i ? ", " : "") << eta[i];
  os << "), sigma = " << sigma << " (factor = " << fv << ", grid = " << gv << ")";
  throw std::runtime_error(os.str());
}

// Shared quadrature core; `gs(eta, sigma)` samples the second factor.
template <class GSample>
double convolve_core(const PointEvaluator& f, GSample&& gs, const KernelQuery& qy,
                     const QuadratureScheme& quad, double diffusion_scale) {
  const int n = qy.dim();
  const double dt = qy.dt();
  const double tau = qy.tau();
  const double t = qy.t();
  if (n > 8) throw std::invalid_argument("spacetime_convolve: dimension cap exceeded");

  const double grading =
      quad.time_grading_exponent > 0.0 ? quad.time_grading_exponent : 4.0;
  const GaussRule& tr = gauss_legendre(quad.time_nodes);
  const GaussRule& sr = gauss_legendre(quad.spatial_nodes);

  const std::vector<double> x_abs = qy.x();
  const std::vector<double>& xi = qy.xi();
  const std::vector<double>& dx = qy.dx();

  std::vector<double> center(n);
  std::vector<double> eta(n);

  double total = 0.0;
  for (int it = 0; it < quad.time_nodes; ++it) {
    const double v = 0.5 * (tr.nodes[it] + 1.0);
    const double wv = 0.5 * tr.weights[it];
    const double u = graded_map(v, grading);
    const double jac = graded_map_derivative(v, grading) * dt;
    if (u <= 0.0 || u >= 1.0 || jac == 0.0) continue;
    const double sigma = tau + dt * u;
    if (!(sigma > tau) || !(sigma < t)) continue;

    const double hw =
        quad.spatial_radius_factor * std::sqrt(2.0 * diffusion_scale * dt * u * (1.0 - u));
    if (!(hw > 0.0)) continue;
    for (int i = 0; i < n; ++i) center[i] = xi[i] + dx[i] * u;

    // Tensor Gauss-Legendre over the product-frame box; the grid factor is
    // read first so the (possibly expensive) apex factor is skipped where the
    // grid window has already decayed to zero.
    const int m = quad.spatial_nodes;
    std::vector<int> idx(n, 0);
    double slice = 0.0;
    while (true) {
      double wgt = 1.0;
      for (int d = 0; d < n; ++d) {
        eta[d] = center[d] + hw * sr.nodes[idx[d]];
        wgt *= hw * sr.weights[idx[d]];
      }
      const double gv = gs(eta.data(), sigma);
      if (gv != 0.0) {
        const double fv = f(x_abs.data(), t, eta.data(), sigma);
        if (!std::isfinite(fv) || !std::isfinite(gv)) throw_nonfinite(eta.data(), n, sigma, fv, gv);
        slice += wgt * fv * gv;
      }
      int d = 0;
      for (; d < n; ++d) {
        if (++idx[d] < m) break;
        idx[d] = 0;
      }
      if (d == n) break;
    }
    total += wv * jac * slice;
  }
  return total;
}

}  // namespace

double spacetime_convolve(const PointEvaluator& f, const GridKernel& g, const KernelQuery& qy,
                          const QuadratureScheme& quad, double diffusion_scale) {
  require_same_base(g, qy);
  if (!g.covers(qy.t()))
    throw std::invalid_argument("spacetime_convolve: grid horizon does not cover the query");
  const int n = qy.dim();
  return convolve_core(
      f,
      [&g, n](const double* eta, double sigma) {
        return g.raw_value(std::span<const double>(eta, static_cast<size_t>(n)), sigma);
      },
      qy, quad, diffusion_scale);
}

double spacetime_convolve(const PointEvaluator& f, const PointEvaluator& g, const KernelQuery& qy,
                          const QuadratureScheme& quad, double diffusion_scale) {
  const std::vector<double>& xi = qy.xi();
  const double tau = qy.tau();
  return convolve_core(
      f, [&g, &xi, tau](const double* eta, double sigma) { return g(eta, sigma, xi.data(), tau); },
      qy, quad, diffusion_scale);
}

double beta_convolution_reference(double lambda, double gamma, double delta,
                                  const KernelQuery& qy) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("beta_convolution_reference: lambda must be positive");
  if (gamma >= 1.0 || delta >= 1.0)
    throw std::invalid_argument("beta_convolution_reference: gamma, delta must be < 1");
  const int n = qy.dim();
  const double dt = qy.dt();
  return std::pow(4.0 * 3.14159265358979323846 / lambda, 0.5 * n) *
         beta_fn(1.0 - gamma, 1.0 - delta) * std::pow(dt, -0.5 * n + 1.0 - gamma - delta) *
         std::exp(-lambda * qy.rho2() / (4.0 * dt));
}

bool LeviEvaluator::ChainKey::operator<(const ChainKey& o) const {
  if (tau != o.tau) return tau < o.tau;
  if (t_max != o.t_max) return t_max < o.t_max;
  return xi < o.xi;
}

LeviEvaluator::LeviEvaluator(std::shared_ptr<const CoefficientField> field, QuadratureScheme quad,
                             LeviOptions opt)
    : field_(std::move(field)), par_(field_), quad_(quad), opt_(opt) {
  if (!field_) throw std::invalid_argument("LeviEvaluator: null field");
  k_ = compute_constants(*field_);
  if (quad_.time_grading_exponent <= 0.0)
    quad_.time_grading_exponent = std::max(4.0, 2.0 / k_.beta);
}

GridSpec LeviEvaluator::resolve_grid_spec() const {
  GridSpec spec = opt_.grid;
  spec.time_power = 0.5 * field_->n() + 1.0 - k_.beta;
  if (spec.grading <= 0.0) spec.grading = std::max(4.0, 2.0 / k_.beta);
  if (spec.halfwidth <= 0.0) {
    // Every assembly window stays inside |y| <= sqrt(rho^2 + 2 M_eff K^2)
    // (Cauchy-Schwarz on rho sqrt(u) + K sqrt(2 M_eff (1-u))), M_eff = 2M.
    double K = quad_.spatial_radius_factor;
    spec.halfwidth =
        std::sqrt(sqr(opt_.rho_hint) + 2.0 * (2.0 * field_->M()) * K * K) + spec.spacing;
  }
  return spec;
}

double LeviEvaluator::chain_bucket(double dt) const {
  // Geometric ladder q0 * 4^k so queries with similar gaps share one chain.
  const double q0 = 0.0125;
  if (dt <= q0) return q0;
  int k = static_cast<int>(std::ceil(std::log(dt / q0) / std::log(4.0) - 1e-12));
  return q0 * std::pow(4.0, k);
}

std::shared_ptr<const IterateChain> LeviEvaluator::build_chain(const std::vector<double>& xi,
                                                               double tau, double t_max,
                                                               int ell_max,
                                                               bool early_stop) const {
  auto chain = std::make_shared<IterateChain>();
  const GridSpec spec = resolve_grid_spec();
  const double time_power = spec.time_power;

  GridKernel phi1(spec, xi, tau, t_max);
  phi1.fill([&](std::span<const double> eta, double sigma) {
    return par_.first_iterate_scaled_at(eta.data(), sigma, xi.data(), tau, time_power);
  });
  chain->first_max = phi1.max_abs_scaled();
  chain->last_max = chain->first_max;
  chain->sum = phi1;
  chain->iterates.push_back(std::move(phi1));

  if (chain->first_max == 0.0) {
    chain->empirical_converged = true;
    return chain;
  }

  const double m_eff = 2.0 * field_->M();
  PointEvaluator phi1_eval = [this](const double* x, double t, const double* eta, double sigma) {
    return par_.first_iterate_at(x, t, eta, sigma);
  };

  for (int ell = 2; ell <= ell_max; ++ell) {
    const GridKernel& prev = chain->iterates.back();
    GridKernel next(spec, xi, tau, t_max);
    next.fill([&](std::span<const double> eta, double sigma) {
      const double gap = sigma - tau;
      if (!(gap > 0.0)) return 0.0;
      std::vector<double> dx(eta.size());
      for (std::size_t i = 0; i < eta.size(); ++i) dx[i] = eta[i] - xi[i];
      KernelQuery node_q = KernelQuery::from_offsets(xi, tau, std::move(dx), gap);
      double raw = spacetime_convolve(phi1_eval, prev, node_q, quad_, m_eff);
      // Back to the bounded self-similar representation.
      return raw * std::pow(gap, time_power);
    });
    chain->last_max = next.max_abs_scaled();
    chain->sum->accumulate(next);
    chain->iterates.push_back(std::move(next));
    if (early_stop && chain->last_max <= opt_.chain_tol * chain->first_max) {
      chain->empirical_converged = true;
      return chain;
    }
  }
  chain->empirical_converged =
      !early_stop || chain->last_max <= opt_.chain_tol * chain->first_max;
  return chain;
}

std::shared_ptr<const IterateChain> LeviEvaluator::chain_for(std::span<const double> xi,
                                                             double tau,
                                                             double t_needed) const {
  ChainKey key{std::vector<double>(xi.begin(), xi.end()), tau,
               tau + chain_bucket(t_needed - tau)};
  std::lock_guard<std::mutex> lock(cache_mu_);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto chain = build_chain(key.xi, tau, key.t_max, opt_.ell_max, /*early_stop=*/true);
  cache_[key] = chain;
  return chain;
}

void LeviEvaluator::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_mu_);
  cache_.clear();
}

std::vector<GridKernel> LeviEvaluator::levi_iterates(std::span<const double> xi, double tau,
                                                     double t_max, int ell_max) const {
  if (ell_max < 1) throw std::invalid_argument("levi_iterates: ell_max must be >= 1");
  auto chain = build_chain(std::vector<double>(xi.begin(), xi.end()), tau, t_max, ell_max,
                           /*early_stop=*/false);
  return chain->iterates;
}

double LeviEvaluator::direct_horizon() const {
  if (opt_.horizon > 0.0) return opt_.horizon;
  // min(delta, 1) keeps both envelope regimes valid; when the certified delta
  // is too small to be a usable gap, fall back to the unit horizon (the
  // series-majorant regime) and let the bound checks speak for themselves.
  if (k_.delta >= 1e-2) return std::min(k_.delta, 1.0);
  return 1.0;
}

PhiSeriesResult LeviEvaluator::phi_series(const KernelQuery& qy) const {
  const double dt = qy.dt();
  if (dt > 1.0 + 1e-12)
    throw std::invalid_argument("phi_series: requires t - tau <= 1 (series-majorant regime)");
  PhiSeriesResult r;
  if (par_.residual_vanishes()) {
    r.value = 0.0;
    r.tail_bound = 0.0;
    r.log_tail_bound = kNegInf;
    r.terms_used = 1;
    return r;
  }
  const double rho2 = qy.rho2() / dt;
  if (dt <= opt_.degenerate_gap) {
    r.value = par_.first_iterate(qy);
    r.log_tail_bound = log_series_tail(k_, 2, dt, rho2);
    r.tail_bound = std::exp(r.log_tail_bound);
    r.terms_used = 1;
    r.degenerate_gap = true;
    return r;
  }
  auto chain = chain_for(qy.xi(), qy.tau(), qy.t());
  const std::vector<double> x_abs = qy.x();
  double value = par_.first_iterate(qy);
  int terms = 1;
  for (std::size_t l = 1; l < chain->iterates.size(); ++l) {
    value += chain->iterates[l].raw_value(x_abs, qy.t());
    ++terms;
  }
  r.value = value;
  r.terms_used = terms;
  r.log_tail_bound = log_series_tail(k_, terms + 1, dt, rho2);
  r.tail_bound = std::exp(r.log_tail_bound);
  // The tail converted to fundamental-solution units (its future contribution
  // through one more Z-convolution) measured against the Z term decides
  // whether truncation is certified when the empirical decay stop failed.
  if (!chain->empirical_converged) {
    double log_tail_corr =
        r.log_tail_bound - std::log(k_.beta) - 0.5 * k_.n * std::log(k_.kappa * k_.c) +
        std::log(dt);
    double log_z_scale = par_.log_value(qy);
    r.truncation_failure =
        log_tail_corr > std::log(opt_.series_tol) + log_z_scale;
  }
  return r;
}

EvalResult LeviEvaluator::fundamental_solution(const KernelQuery& qy) const {
  EvalResult res;
  res.z_value = par_.value(qy);
  const double dt = qy.dt();
  if (par_.residual_vanishes()) {
    res.value = res.z_value;
    res.diag.terms_used = 0;
    res.diag.log_tail_bound = kNegInf;
    return res;
  }
  if (dt <= opt_.degenerate_gap) {
    res.value = res.z_value;
    res.diag.degenerate_gap = true;
    res.diag.log_tail_bound = kNegInf;
    return res;
  }

  auto chain = chain_for(qy.xi(), qy.tau(), qy.t());
  PointEvaluator z_eval = [this](const double* x, double t, const double* eta, double sigma) {
    return par_.value_at(x, t, eta, sigma);
  };
  res.correction = spacetime_convolve(z_eval, *chain->sum, qy, quad_, 2.0 * field_->M());
  res.value = res.z_value + res.correction;

  const double rho2 = qy.rho2() / dt;
  res.diag.terms_used = static_cast<int>(chain->iterates.size());
  res.diag.empirical_converged = chain->empirical_converged;
  res.diag.log_tail_bound = log_series_tail(k_, res.diag.terms_used + 1, dt, rho2);
  res.diag.tail_bound = std::exp(res.diag.log_tail_bound);
  if (!chain->empirical_converged) {
    double log_tail_corr = res.diag.log_tail_bound - std::log(k_.beta) -
                           0.5 * k_.n * std::log(k_.kappa * k_.c) + std::log(dt);
    double log_z = res.z_value > 0.0 ? std::log(res.z_value) : 0.0;
    res.diag.truncation_failure = log_tail_corr > std::log(opt_.series_tol) + log_z;
  }
  return res;
}

EvalResult LeviEvaluator::compose_long_time(const KernelQuery& qy, int slice_override) const {
  const double dt = qy.dt();
  const double horizon = direct_horizon();
  int m = slice_override > 0
              ? slice_override
              : std::max(1, static_cast<int>(std::ceil(dt / horizon - 1e-12)));
  if (m == 1) return fundamental_solution(qy);

  const int n = qy.dim();
  const double tau = qy.tau();
  const std::vector<double>& xi = qy.xi();
  const std::vector<double>& dx = qy.dx();
  const std::vector<double> x_abs = qy.x();
  const double h = dt / m;
  const double m_eff = 2.0 * field_->M();
  const double K = quad_.spatial_radius_factor;
  const int p = quad_.spatial_nodes;
  const GaussRule& rule = gauss_legendre(p);

  // Node lattice of slice k: product-frame box at time sigma_k = tau + k h.
  auto slice_nodes = [&](int k, std::vector<std::vector<double>>& pts,
                         std::vector<double>& wts) {
    const double u = static_cast<double>(k) / m;
    const double hw = K * std::sqrt(2.0 * m_eff * dt * u * (1.0 - u));
    std::vector<double> center(n);
    for (int i = 0; i < n; ++i) center[i] = xi[i] + dx[i] * u;
    std::vector<int> idx(n, 0);
    pts.clear();
    wts.clear();
    while (true) {
      std::vector<double> pt(n);
      double w = 1.0;
      for (int d = 0; d < n; ++d) {
        pt[d] = center[d] + hw * rule.nodes[idx[d]];
        w *= hw * rule.weights[idx[d]];
      }
      pts.push_back(std::move(pt));
      wts.push_back(w);
      int d = 0;
      for (; d < n; ++d) {
        if (++idx[d] < p) break;
        idx[d] = 0;
      }
      if (d == n) break;
    }
  };

  auto eval_pair = [&](std::span<const double> xa, double ta, std::span<const double> xb,
                       double tb) {
    return fundamental_solution(KernelQuery::from_points(xa, ta, xb, tb)).value;
  };

  std::vector<std::vector<double>> pts_prev, pts_cur;
  std::vector<double> wts_prev, wts_cur;
  slice_nodes(1, pts_prev, wts_prev);
  std::vector<double> v_prev(pts_prev.size());
  for (std::size_t j = 0; j < pts_prev.size(); ++j)
    v_prev[j] = eval_pair(pts_prev[j], tau + h, xi, tau);

  for (int k = 2; k <= m - 1; ++k) {
    slice_nodes(k, pts_cur, wts_cur);
    std::vector<double> v_cur(pts_cur.size(), 0.0);
    for (std::size_t j = 0; j < pts_cur.size(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < pts_prev.size(); ++i)
        acc += wts_prev[i] * eval_pair(pts_cur[j], tau + k * h, pts_prev[i], tau + (k - 1) * h) *
               v_prev[i];
      v_cur[j] = acc;
    }
    pts_prev.swap(pts_cur);
    wts_prev.swap(wts_cur);
    v_prev.swap(v_cur);
  }

  double lhs = 0.0;
  for (std::size_t i = 0; i < pts_prev.size(); ++i)
    lhs += wts_prev[i] *
           eval_pair(x_abs, qy.t(), pts_prev[i], tau + (m - 1) * h) * v_prev[i];

  EvalResult res;
  res.value = lhs;
  res.z_value = par_.value(qy);
  res.correction = lhs - res.z_value;
  res.diag.composed = true;
  res.diag.composition_slices = m;
  res.diag.log_tail_bound = kNegInf;
  return res;
}

EvalResult LeviEvaluator::evaluate_full(const KernelQuery& qy) const {
  if (qy.dt() <= direct_horizon() * (1.0 + 1e-12)) return fundamental_solution(qy);
  return compose_long_time(qy);
}

ReproducingResult LeviEvaluator::reproducing_check(const KernelQuery& qy, double sigma) const {
  const double tau = qy.tau();
  const double t = qy.t();
  if (!(sigma > tau) || !(sigma < t))
    throw std::invalid_argument("reproducing_check: sigma must lie strictly inside (tau, t)");
  const int n = qy.dim();
  const std::vector<double>& xi = qy.xi();
  const std::vector<double>& dx = qy.dx();
  const std::vector<double> x_abs = qy.x();

  ReproducingResult r;
  r.rhs = evaluate(qy);

  const double u = (sigma - tau) / qy.dt();
  const double hw = quad_.spatial_radius_factor *
                    std::sqrt(2.0 * (2.0 * field_->M()) * qy.dt() * u * (1.0 - u));
  std::vector<double> center(n);
  for (int i = 0; i < n; ++i) center[i] = xi[i] + dx[i] * u;

  const int p = std::max(quad_.spatial_nodes, 48);
  const GaussRule& rule = gauss_legendre(p);
  std::vector<int> idx(n, 0);
  std::vector<double> eta(n);
  double lhs = 0.0;
  while (true) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      eta[d] = center[d] + hw * rule.nodes[idx[d]];
      w *= hw * rule.weights[idx[d]];
    }
    double inner =
        fundamental_solution(KernelQuery::from_points(eta, sigma, xi, tau)).value;
    if (inner != 0.0) {
      double outer =
          fundamental_solution(KernelQuery::from_points(x_abs, t, eta, sigma)).value;
      lhs += w * outer * inner;
    }
    int d = 0;
    for (; d < n; ++d) {
      if (++idx[d] < p) break;
      idx[d] = 0;
    }
    if (d == n) break;
  }
  r.lhs = lhs;
  r.rel_residual = r.rhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.rhs)
                                : std::abs(r.lhs);
  return r;
}

}  // namespace levi
