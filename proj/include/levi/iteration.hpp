// Correction-series machinery: space-time convolution quadrature, the
// iterated correction kernels Phi_l built on self-similar grids, the series
// Phi with a rigorous factorial-decay tail bound, assembly of the fundamental
// solution E = Z + int int Z * Phi, the semigroup (reproducing) identity
// check, and long-gap evaluation by composing short-gap kernels.
//
// Geometry of every space-time integral here: for a query with apex (x, t)
// and base (xi, tau), the integrand at intermediate time sigma = tau + u dt
// is a product of two Gaussian-type factors whose product concentrates in a
// ball centered on the straight segment point xi + (x - xi) u with radius
// ~ sqrt(2 M_eff dt u (1 - u)). Spatial windows track exactly that center and
// width; the time variable is integrated in a graded coordinate that
// regularizes the integrable endpoint singularities u^(beta-1), (1-u)^(beta-1).
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "levi/bounds.hpp"
#include "levi/coeffs.hpp"
#include "levi/grid.hpp"
#include "levi/kernels.hpp"
#include "levi/parametrix.hpp"
#include "levi/quadrature.hpp"

namespace levi {

// Apex-anchored integrand factor f(x, t; eta, sigma). Raw pointers keep the
// innermost quadrature loops allocation-free.
using PointEvaluator =
    std::function<double(const double* x, double t, const double* eta, double sigma)>;

// Numerical value of  int_tau^t int_{R^n} f(x,t; eta,sigma) g(eta,sigma) deta dsigma
// where g is a grid kernel sharing the query's base. diffusion_scale is the
// M_eff of the window geometry above (2M for products of heat-type kernels
// with curvature bound M; 1/lambda for pure Gaussians exp(-lambda|.|^2/(4 gap))).
// Throws std::runtime_error naming the offending node if an integrand sample
// is non-finite, and std::invalid_argument if g does not cover (tau, t] or is
// anchored at a different base.
double spacetime_convolve(const PointEvaluator& f, const GridKernel& g, const KernelQuery& qy,
                          const QuadratureScheme& quad, double diffusion_scale);

// Same integral with an analytic second factor in place of the grid: g is
// evaluated as g(eta, sigma, xi, tau) at the query's base. Used to validate
// the quadrature against closed forms and for spot checks of single iterates.
double spacetime_convolve(const PointEvaluator& f, const PointEvaluator& g, const KernelQuery& qy,
                          const QuadratureScheme& quad, double diffusion_scale);

// Closed form of the model space-time convolution of two Gaussian pieces
//   (t-sigma)^(-n/2-gamma)  exp(-lambda |x-eta|^2 / (4 (t-sigma)))  and
//   (sigma-tau)^(-n/2-delta) exp(-lambda |eta-xi|^2 / (4 (sigma-tau))):
//   (4 pi / lambda)^(n/2) B(1-gamma, 1-delta) (t-tau)^(-n/2+1-gamma-delta)
//     * exp(-lambda |x-xi|^2 / (4 (t-tau))).
// Requires lambda > 0 and gamma, delta < 1. Used to validate the quadrature.
double beta_convolution_reference(double lambda, double gamma, double delta,
                                  const KernelQuery& qy);

// Tuning knobs of the series evaluator.
struct LeviOptions {
  int ell_max = 12;            // hard cap on the number of correction kernels
  double series_tol = 1e-4;    // series tail target, relative to the Z term
  double chain_tol = 1e-4;     // grid-level stop: last iterate vs first, in scaled max-norm
  double horizon = 0.0;        // direct-assembly gap limit; 0 = auto (see direct_horizon())
  double degenerate_gap = 1e-10;  // below this the correction is skipped (E = Z, flagged)
  double rho_hint = 4.0;       // largest scaled offset |dx|/sqrt(dt) the grids must cover
  GridSpec grid;               // lattice parameters; halfwidth 0 = auto-sized from rho_hint
};

struct SeriesDiagnostics {
  int terms_used = 0;             // correction kernels summed
  double tail_bound = 0.0;        // analytic factorial-decay tail (value domain; may be inf)
  double log_tail_bound = 0.0;    // same in logs (always finite or -inf)
  bool degenerate_gap = false;    // gap under degenerate_gap: correction skipped
  bool empirical_converged = true;  // grid chain stopped by decay, not by the cap
  bool truncation_failure = false;  // neither stop criterion certified the truncation
  bool composed = false;          // long-gap composition path used
  int composition_slices = 1;
};

struct EvalResult {
  double value = 0.0;       // E
  double z_value = 0.0;     // frozen-coefficient part Z
  double correction = 0.0;  // E - Z as computed
  SeriesDiagnostics diag;
};

struct PhiSeriesResult {
  double value = 0.0;
  double tail_bound = 0.0;      // value-domain analytic tail (inf allowed; see log form)
  double log_tail_bound = 0.0;
  int terms_used = 0;
  bool truncation_failure = false;
  bool degenerate_gap = false;
};

struct ReproducingResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_residual = 0.0;
};

// The grid chain Phi_1..Phi_L for one base point, plus their running sum
// (the only grid E-assembly needs).
struct IterateChain {
  std::vector<GridKernel> iterates;
  std::optional<GridKernel> sum;
  double first_max = 0.0;  // scaled max-norm of Phi_1
  double last_max = 0.0;   // scaled max-norm of the last iterate kept
  bool empirical_converged = true;
};

// Evaluator of the constructed fundamental solution for one coefficient
// field. Chains are cached per base point and reused across queries; the
// cache key rounds the needed horizon up a geometric ladder so nearby query
// gaps share one chain. Thread-safe: chain construction is serialized, all
// evaluation after construction is read-only.
class LeviEvaluator {
 public:
  explicit LeviEvaluator(std::shared_ptr<const CoefficientField> field,
                         QuadratureScheme quad = {}, LeviOptions opt = {});

  const CoefficientField& field() const { return *field_; }
  const Parametrix& parametrix() const { return par_; }
  const BoundConstants& constants() const { return k_; }
  const QuadratureScheme& quad() const { return quad_; }
  const LeviOptions& options() const { return opt_; }

  // Correction kernels Phi_1..Phi_ell_max for one base, as grid kernels over
  // (tau, t_max]. Phi_1 is filled analytically; each next kernel is one
  // grid-to-grid convolution pass. No early stopping: exactly ell_max grids.
  std::vector<GridKernel> levi_iterates(std::span<const double> xi, double tau, double t_max,
                                        int ell_max) const;

  // Correction-series value at one query with the analytic tail after the
  // summed terms. Requires dt <= 1 (the regime where the series majorant
  // applies); gaps under degenerate_gap return the first kernel alone.
  PhiSeriesResult phi_series(const KernelQuery& qy) const;

  // Direct assembly E = Z + int int Z Phi. Dispatches nothing: always the
  // direct path (callers wanting automatic long-gap handling use evaluate()).
  EvalResult fundamental_solution(const KernelQuery& qy) const;

  // Composition over ceil(dt / horizon) equal slices via the semigroup
  // identity; slice_override forces the slice count (0 = derive from horizon).
  // With one slice this is exactly fundamental_solution.
  EvalResult compose_long_time(const KernelQuery& qy, int slice_override = 0) const;

  // Auto dispatch: direct when dt <= direct_horizon(), else composed.
  EvalResult evaluate_full(const KernelQuery& qy) const;
  double evaluate(const KernelQuery& qy) const { return evaluate_full(qy).value; }

  // Semigroup identity at intermediate time sigma:
  //   lhs = int E(x,t; eta,sigma) E(eta,sigma; xi,tau) deta   vs   rhs = E(x,t; xi,tau).
  ReproducingResult reproducing_check(const KernelQuery& qy, double sigma) const;

  // Resolved direct-assembly horizon: the explicit option when set, else
  // min(delta, 1) from the certified constants, falling back to 1 when delta
  // is too small to be a usable gap (rough fields drive delta toward 0).
  double direct_horizon() const;

  // Chain access for diagnostics/tests. t_needed is rounded up the bucket ladder.
  std::shared_ptr<const IterateChain> chain_for(std::span<const double> xi, double tau,
                                                double t_needed) const;
  void clear_cache() const;

 private:
  struct ChainKey {
    std::vector<double> xi;
    double tau;
    double t_max;
    bool operator<(const ChainKey& o) const;
  };

  std::shared_ptr<const IterateChain> build_chain(const std::vector<double>& xi, double tau,
                                                  double t_max, int ell_max,
                                                  bool early_stop) const;
  GridSpec resolve_grid_spec() const;
  double chain_bucket(double dt) const;

  std::shared_ptr<const CoefficientField> field_;
  Parametrix par_;
  QuadratureScheme quad_;
  LeviOptions opt_;
  BoundConstants k_;

  mutable std::mutex cache_mu_;
  mutable std::map<ChainKey, std::shared_ptr<const IterateChain>> cache_;
};

}  // namespace levi
