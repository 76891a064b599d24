// Line-oriented `key = value` configuration: field descriptors, coefficient
// expressions, quadrature/grid/evaluator knobs, and the query-sampling region
// used by the CLI subcommands.
//
//   n = 1                    spatial dimension (1..8; bound checks target 1-2)
//   alpha = 1                Hölder exponent in (0, 1]
//   kappa = 1.5              ellipticity floor (0 < kappa <= M)
//   M = 2.5                  ellipticity ceiling
//   N1 = auto                Hölder seminorm bound: number, or `auto` to
//                            estimate from a dense sample and inflate by 1.1
//   N2 = 0                   bound on sum ||b_i|| + ||q||
//   a[1][1] = 2 + 0.5*sin(x1)*cos(t)     matrix entries (1-based, upper
//                            triangle suffices; symmetric completion)
//   b[1] = 0                 drift entries (omitted = zero)
//   q = 0                    potential (omitted = zero)
//   quad.spatial_nodes = 24  quadrature knobs
//   quad.time_nodes = 16
//   quad.radius_factor = 8
//   quad.time_grading = 0    0 = auto (2/beta)
//   grid.time_slices = 48    correction-kernel lattice knobs
//   grid.spacing = 0.25
//   grid.halfwidth = 0       0 = auto from rho_max
//   grid.grading = 4
//   levi.ell_max = 12        series evaluator knobs
//   levi.series_tol = 1e-4
//   levi.chain_tol = 1e-4
//   levi.horizon = 0         0 = auto (min(delta, 1), floored at 1 when
//                            delta degenerates)
//   levi.degenerate_gap = 1e-10
//   region.x_lo = -6         query sampling region
//   region.x_hi = 6
//   region.tau = 0
//   region.dt_max = 1
//   region.rho_max = 4
//
// `#` starts a comment; blank lines are ignored.
#pragma once

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>

#include "levi/coeffs.hpp"
#include "levi/iteration.hpp"
#include "levi/quadrature.hpp"

namespace levi {

class ConfigError : public std::runtime_error {
 public:
  // line > 0 names the offending input line; line <= 0 marks whole-file
  // problems (a missing required entry, a cross-entry contradiction).
  ConfigError(const std::string& msg, int line)
      : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + msg
                                    : "config: " + msg),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

struct RunConfig {
  int n = 1;
  double alpha = 1.0;
  double kappa = 1.0;
  double M = 1.0;
  double N1 = 0.0;
  bool N1_auto = false;
  double N2 = 0.0;

  std::vector<std::string> a_exprs;  // n*n row-major source text
  std::vector<std::string> b_exprs;  // size n when present, else empty
  std::string q_expr;                // empty = zero

  QuadratureScheme quad;
  LeviOptions levi;

  double x_lo = -6.0, x_hi = 6.0;
  double tau = 0.0;
  double dt_max = 1.0;
  double rho_max = 4.0;

  // Built from the entries above (N1 as configured; 0 when N1_auto until
  // resolve_auto_n1 replaces it).
  std::shared_ptr<const CoefficientField> field;

  Region sampling_region() const;
};

RunConfig load_config(std::istream& is);
RunConfig load_config_file(const std::string& path);
RunConfig load_config_text(const std::string& text);

// For N1 = auto: dense Hölder-seminorm estimate over the sampling region,
// inflated by 1.1, then the field is rebuilt with the resolved value.
// Deterministic in (samples, seed). Returns the resolved N1.
double resolve_auto_n1(RunConfig& cfg, int samples = 4000, unsigned long long seed = 12345);

}  // namespace levi
