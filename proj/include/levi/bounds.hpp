// Explicit constants of the two-sided Gaussian estimate for the constructed
// fundamental solution, the upper/lower envelopes built from them, and the
// pointwise certification of computed values against those envelopes.
//
// Everything here is a closed-form function of the field descriptors
// (n, alpha, kappa, M, N1, N2). The constants can span hundreds of orders of
// magnitude for rough fields (the series majorant S grows like
// exp(Lambda^(2/alpha))), so each quantity that can leave the double range is
// carried in the log domain alongside its raw value, and every envelope has a
// log-form entry point that stays finite where the value form over/underflows.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "levi/coeffs.hpp"
#include "levi/kernels.hpp"

namespace levi {

// The full constant chain, upper-bound side then lower-bound side.
//
//   beta   = alpha/2
//   c      = 1/(8M)                       upper Gaussian decay rate
//   C      = (4 kappa pi)^(-n/2) * max_{lambda>0} [ N1 (1/(2 kappa) +
//            lambda^2/(4 kappa^2)) (1+lambda^2)^(alpha/2) + N2 (lambda/kappa
//            + 1) ] e^(-c lambda^2)       first-correction envelope prefactor
//   Ctilde = (4 pi / c)^(n/2),  Cbar = 1/Ctilde
//   Lambda = C * Ctilde * Gamma(beta)     per-order growth of iterate bounds
//   S      = C + Cbar * sum_{l>=2} Lambda^l / Gamma(l beta)   series majorant
//   Chat   = (4 kappa pi)^(-n/2) + S B(1,beta) / (kappa c)^(n/2)
//   aleph2 = Ctilde^(-1) e^(max(0, ln(Ctilde Chat))),  aleph3 = max(0, ln(Ctilde Chat))
//
//   nu     = kappa^(n/2) / (e M^(n/2) 2^(3n) Gamma(n/2+1))   chain-step floor
//   d      = 4 |ln nu| / kappa            lower Gaussian decay rate
//   mu     = e^(-1) / (2 (4 pi M)^(n/2))  near-diagonal kernel floor
//   delta  = min(1, [e^(-1) (4 pi M)^(-n/2) (kappa c)^(n/2) /
//            (2 S B(1,beta))]^(1/beta))   lower-bound time horizon
//   C0     = min(mu, kappa^(-n/2) nu)
//   aleph0 = Ctilde^(-1) e^(min(0, ln(Ctilde C0))),  aleph1 = -min(0, ln(Ctilde C0)/delta)
struct BoundConstants {
  int n = 1;
  double alpha = 1.0, kappa = 1.0, M = 1.0, N1 = 0.0, N2 = 0.0;

  double beta = 0.5;
  double c = 0.125;
  double C = 0.0;
  double Ctilde = 1.0;
  double Cbar = 1.0;
  double Lambda = 0.0;
  double S = 0.0;
  double Chat = 0.0;
  double mu = 0.0;
  double delta = 1.0;
  double nu = 0.0;
  double C0 = 0.0;
  double d = 0.0;
  double aleph0 = 0.0, aleph1 = 0.0, aleph2 = 0.0, aleph3 = 0.0;

  // Log-domain copies (finite wherever the math is, even if the raw double
  // over/underflowed). log_C and log_S are -inf when N1 = N2 = 0.
  double log_C = 0.0, log_Lambda = 0.0, log_S = 0.0, log_Chat = 0.0;
  double log_delta = 0.0, log_aleph0 = 0.0, log_aleph2 = 0.0;
};

BoundConstants compute_constants(const CoefficientField& field);

// Lower decay rate evaluated from its self-contained display form
//   4 ln(e 2^(3n) (M/kappa)^(n/2) Gamma(n/2+1)) / kappa,
// algebraically equal to 4 |ln nu| / kappa; kept as an independent code path
// so the two can be cross-checked.
double lower_rate_from_display(int n, double kappa, double M);

// Convenience single-constant entry points (same pipeline as compute_constants).
double constant_C(const CoefficientField& field);
double series_majorant_S(const CoefficientField& field);

// Two-sided envelopes at a query (value domain; may legitimately over- or
// underflow a double -- use the log forms for comparisons):
//   upper: aleph2 e^(aleph3 dt) dt^(-n/2) e^(-c  |dx|^2/dt)
//   lower: aleph0 e^(-aleph1 dt) dt^(-n/2) e^(-d |dx|^2/dt)
double upper_envelope(const BoundConstants& k, const KernelQuery& qy);
double lower_envelope(const BoundConstants& k, const KernelQuery& qy);
// rho2 is the scaled squared offset |dx|^2/dt.
double log_upper_envelope(const BoundConstants& k, double dt, double rho2);
double log_lower_envelope(const BoundConstants& k, double dt, double rho2);

// Correction-series envelopes. The per-term time power has two variants:
//   PerTermPower: dt^(-n/2-1+l*beta) -- each term's own power; for fields with
//                 b = q = 0 this form is valid at every gap.
//   UniformPower: dt^(-n/2-1+beta)   -- all powers flattened to the first
//                 term's; valid only for gaps dt <= 1 (dt^(l beta) <= dt^beta
//                 needs dt <= 1), which is how the series majorant S is used.
enum class EnvelopeVariant { PerTermPower, UniformPower };

// l = 1 envelope: ln C - (n/2+1-beta) ln dt - c rho2.
double log_phi1_envelope(const BoundConstants& k, double dt, double rho2);
// l >= 1 envelope: ln Cbar + l ln Lambda - ln Gamma(l beta) + power - c rho2.
double log_phi_ell_envelope(const BoundConstants& k, int ell, double dt, double rho2,
                            EnvelopeVariant variant);
// Whole-series envelope ln S - (n/2+1-beta) ln dt - c rho2 (UniformPower regime).
double log_phi_series_envelope(const BoundConstants& k, double dt, double rho2);
// Envelope of the assembled correction E - Z:
//   ln S + ln B(1,beta) - (n/2) ln(kappa c) + (-n/2+beta) ln dt - c rho2.
double log_correction_envelope(const BoundConstants& k, double dt, double rho2);
// Tail sum_{l >= ell_from} of the PerTermPower envelopes (log domain; -inf when
// the series vanishes). Finite for every dt > 0.
double log_series_tail(const BoundConstants& k, int ell_from, double dt, double rho2);

// Family of upper envelopes trading decay rate against prefactor: for any
// eps in (0,1) the envelope holds with rate c_eps = eps/(4M) and constants
// rebuilt by re-running the whole pipeline with the Gaussian budget
// 1/(4M) split as c_eps (kept in the envelope) + (1-eps)/(4M) (absorbed into
// the re-maximized C). eps = 1/2 reproduces the base constants exactly.
struct EpsilonConstants {
  double eps = 0.5;
  double c_eps = 0.0;
  double aleph2_eps = 0.0;
  double aleph3_eps = 0.0;
  double log_aleph2_eps = 0.0;
  BoundConstants pipeline;  // full re-run for inspection
};
EpsilonConstants epsilon_upper_constants(const CoefficientField& field, double eps);
double log_upper_envelope_eps(const EpsilonConstants& e, int n, double dt, double rho2);

// Sharper drift-free upper envelope (requires b = 0 and q = 0 on the field;
// valid at every gap, no unit-time restriction):
//   (4 kappa pi)^(-n/2) dt^(-n/2) e^(-rho2/(4M)) *
//     (1 + c1 dt^(alpha/2) e^(c2 (dt + rho^shape_exponent)))
// with rho = sqrt(rho2). c1, c2 are caller-supplied (fit-then-verify).
double precise_upper_envelope(const CoefficientField& field, const KernelQuery& qy, double c1,
                              double c2);
double log_precise_upper_envelope(const CoefficientField& field, double dt, double rho2,
                                  double c1, double c2);
// (4 alpha + 8) / (3 alpha + 4), the power of rho in the sharpened envelope.
double shape_exponent(double alpha);

// Pointwise certification of computed kernel values against the envelopes.
// Comparisons run in the log domain with relative slack `slack` (the exact
// constant-coefficient case touches the upper envelope with zero margin at
// dx = 0, so the comparison must not be strict).
struct QueryMargin {
  double dt = 0.0;
  double rho2 = 0.0;
  double log_value = 0.0;   // -inf when value <= 0
  double margin_low = 0.0;  // log(value) - log(lower envelope); >= 0 wanted
  double margin_high = 0.0; // log(upper envelope) - log(value); >= 0 wanted
  bool pass_low = false;
  bool pass_high = false;
};
struct TwoSidedReport {
  std::vector<QueryMargin> entries;
  int violations = 0;
  double worst_margin_low = 0.0;
  double worst_margin_high = 0.0;
  bool pass() const { return violations == 0; }
};
TwoSidedReport check_two_sided(const CoefficientField& field,
                               const std::vector<std::pair<KernelQuery, double>>& values,
                               const BoundConstants& k, double slack = 1e-9);

// Straight-line point chain x_k = x + (k/m)(xi - x), k = 0..m (endpoints
// reproduced exactly).
std::vector<std::vector<double>> build_chain(const std::vector<double>& x,
                                             const std::vector<double>& xi, int m);
// Smallest m >= 2 with 4 dist2 <= m kappa dt, so chain gaps satisfy
// |x_{k+1} - x_k|^2 <= kappa dt / (4 m) ... i.e. gap <= sqrt(kappa dt)/2.
int smallest_chain_m(double dist2, double kappa, double dt);

// JSON report: every constant with its value and defining formula.
std::string constants_to_json(const BoundConstants& k);

}  // namespace levi
