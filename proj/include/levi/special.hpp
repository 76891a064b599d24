// Gamma/Beta special functions used by the kernel-bound constant pipeline.
//
// The series constants downstream need Gamma at small fractional arguments
// (beta = alpha/2 can be as small as ~0.05) and log-Gamma at large arguments
// (series terms up to index ~10^3), so both linear- and log-domain entry
// points are provided. Accuracy target for the Lanczos evaluation is ~1e-13
// relative on (0, 170), cross-checked against the standard library in tests.
#pragma once

#include <vector>

namespace levi {

// Gamma(x) for x > 0 (Lanczos approximation, reflection not needed here).
double gamma_fn(double x);

// ln Gamma(x) for x > 0; stays finite where Gamma(x) overflows a double.
double log_gamma(double x);

// Euler Beta B(p, q) = Gamma(p)Gamma(q)/Gamma(p+q), p,q > 0.
double beta_fn(double p, double q);

// log(sum(exp(log_terms))): overflow-safe reduction for series whose terms
// are only representable in the log domain. Empty input -> -inf.
double log_sum_exp(const std::vector<double>& log_terms);

}  // namespace levi
