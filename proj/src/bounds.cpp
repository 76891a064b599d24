#include "levi/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "levi/special.hpp"

namespace levi {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

// Prefactor polynomial of the first-correction envelope (before the Gaussian
// damping): N1 (1/(2k) + l^2/(4k^2)) (1+l^2)^(a/2) + N2 (l/k + 1).
double prefactor_poly(double lambda, double alpha, double kappa, double N1, double N2) {
  double l2 = lambda * lambda;
  double holder = N1 * (1.0 / (2.0 * kappa) + l2 / (4.0 * kappa * kappa)) *
                  std::pow(1.0 + l2, 0.5 * alpha);
  double lower_order = N2 * (lambda / kappa + 1.0);
  return holder + lower_order;
}

// max over lambda >= 0 of prefactor_poly * exp(-rate lambda^2): coarse scan to
// bracket the max, then golden-section refinement. Deterministic.
double maximize_damped_prefactor(double alpha, double kappa, double N1, double N2, double rate) {
  if (N1 == 0.0 && N2 == 0.0) return 0.0;
  auto g = [&](double lambda) {
    return prefactor_poly(lambda, alpha, kappa, N1, N2) * std::exp(-rate * lambda * lambda);
  };
  // Stationary points satisfy lambda^2 <= (degree)/(2 rate) + O(1); scan well past.
  double lambda_hi = 10.0 * std::max(1.0, std::sqrt((alpha + 6.0) / (2.0 * rate)));
  const int scan = 8192;
  int best = 0;
  double best_val = g(0.0);
  for (int i = 1; i <= scan; ++i) {
    double lam = lambda_hi * i / scan;
    double val = g(lam);
    if (val > best_val) {
      best_val = val;
      best = i;
    }
  }
  double lo = lambda_hi * std::max(0, best - 1) / scan;
  double hi = lambda_hi * std::min(scan, best + 1) / scan;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = g(x1), f2 = g(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, b); ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = g(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = g(x1);
    }
  }
  return std::max(best_val, std::max(f1, f2));
}

// sum_{l >= from} exp(l log_growth - lgamma(l beta)) in the log domain.
// The lgamma term eventually dominates any linear growth, so the series always
// converges; terms are accumulated until they fall 700 nats below the peak.
double log_series_sum(double log_growth, double beta, int from, int cap = 400000) {
  if (log_growth == kNegInf) return kNegInf;
  std::vector<double> logs;
  double peak = kNegInf;
  bool converged = false;
  for (int l = from; l < from + cap; ++l) {
    double term = l * log_growth - log_gamma(l * beta);
    logs.push_back(term);
    peak = std::max(peak, term);
    if (logs.size() >= 2 && term < logs[logs.size() - 2] && term < peak - 700.0) {
      converged = true;
      break;
    }
  }
  // Truncating here would certify an under-sized majorant, so refuse instead.
  // The peak term sits near l with beta psi(l beta) = log_growth; small
  // smoothness exponents combined with large growth push it past any cap.
  if (!converged)
    throw std::runtime_error(
        "series majorant did not converge within the term cap; the declared "
        "field constants are too rough for a certifiable envelope");
  return log_sum_exp(logs);
}

// Shared pipeline: the Gaussian budget of the frozen kernel is split into the
// envelope rate c_env (kept in every e^(-c rho^2) factor) and the damping rate
// c_damp (absorbed into the maximized prefactor C). The base constants use the
// equal split c_env = c_damp = 1/(8M).
BoundConstants compute_with_rates(const CoefficientField& f, double c_env, double c_damp) {
  BoundConstants k;
  k.n = f.n();
  k.alpha = f.alpha();
  k.kappa = f.kappa();
  k.M = f.M();
  k.N1 = f.N1();
  k.N2 = f.N2();
  const double n2 = 0.5 * k.n;

  k.beta = 0.5 * k.alpha;
  k.c = c_env;

  double maxval = maximize_damped_prefactor(k.alpha, k.kappa, k.N1, k.N2, c_damp);
  k.C = std::pow(4.0 * k.kappa * kPi, -n2) * maxval;
  k.log_C = k.C > 0.0 ? std::log(k.C) : kNegInf;

  k.Ctilde = std::pow(4.0 * kPi / c_env, n2);
  k.Cbar = 1.0 / k.Ctilde;
  double log_Ctilde = std::log(k.Ctilde);

  k.log_Lambda = k.log_C + log_Ctilde + log_gamma(k.beta);
  k.Lambda = std::exp(k.log_Lambda);

  // S = C + Cbar * sum_{l>=2} Lambda^l / Gamma(l beta)
  double log_tail_sum = log_series_sum(k.log_Lambda, k.beta, 2);
  k.log_S = logsumexp2(k.log_C, -log_Ctilde + log_tail_sum);
  k.S = std::exp(k.log_S);

  // Chat = (4 kappa pi)^(-n/2) + S B(1,beta) / (kappa c)^(n/2), B(1,beta) = 1/beta.
  double log_B = -std::log(k.beta);
  double log_kc = std::log(k.kappa * c_env);
  k.log_Chat = logsumexp2(-n2 * std::log(4.0 * k.kappa * kPi), k.log_S + log_B - n2 * log_kc);
  k.Chat = std::exp(k.log_Chat);

  double z_up = log_Ctilde + k.log_Chat;  // ln(Ctilde * Chat)
  k.aleph3 = std::max(0.0, z_up);
  k.log_aleph2 = -log_Ctilde + k.aleph3;
  k.aleph2 = std::exp(k.log_aleph2);

  // Lower-bound chain.
  double abs_log_nu =
      1.0 + n2 * std::log(k.M / k.kappa) + 3.0 * k.n * std::log(2.0) + log_gamma(n2 + 1.0);
  k.nu = std::exp(-abs_log_nu);
  k.d = 4.0 * abs_log_nu / k.kappa;
  k.mu = std::exp(-1.0) / (2.0 * std::pow(4.0 * kPi * k.M, n2));
  k.C0 = std::min(k.mu, std::pow(k.kappa, -n2) * k.nu);

  // delta = min(1, [e^{-1}(4 pi M)^{-n/2}(kappa c)^{n/2} / (2 S B(1,beta))]^{1/beta})
  if (k.log_S == kNegInf) {
    k.log_delta = 0.0;
  } else {
    double log_delta_raw =
        (-1.0 - n2 * std::log(4.0 * kPi * k.M) + n2 * log_kc - std::log(2.0) - k.log_S - log_B) /
        k.beta;
    k.log_delta = std::min(0.0, log_delta_raw);
  }
  k.delta = std::exp(k.log_delta);

  double z_lo = log_Ctilde + std::log(k.C0);  // ln(Ctilde * C0)
  k.log_aleph0 = -log_Ctilde + std::min(0.0, z_lo);
  k.aleph0 = std::exp(k.log_aleph0);
  k.aleph1 = z_lo >= 0.0 ? 0.0 : -z_lo / k.delta;
  return k;
}

}  // namespace

BoundConstants compute_constants(const CoefficientField& field) {
  double c = 1.0 / (8.0 * field.M());
  return compute_with_rates(field, c, c);
}

double lower_rate_from_display(int n, double kappa, double M) {
  double n2 = 0.5 * n;
  return 4.0 *
         std::log(std::exp(1.0) * std::pow(2.0, 3.0 * n) * std::pow(M / kappa, n2) *
                  gamma_fn(n2 + 1.0)) /
         kappa;
}

double constant_C(const CoefficientField& field) { return compute_constants(field).C; }
double series_majorant_S(const CoefficientField& field) { return compute_constants(field).S; }

double log_upper_envelope(const BoundConstants& k, double dt, double rho2) {
  if (!(dt > 0.0)) throw std::invalid_argument("log_upper_envelope: dt must be positive");
  return k.log_aleph2 + k.aleph3 * dt - 0.5 * k.n * std::log(dt) - k.c * rho2;
}

double log_lower_envelope(const BoundConstants& k, double dt, double rho2) {
  if (!(dt > 0.0)) throw std::invalid_argument("log_lower_envelope: dt must be positive");
  return k.log_aleph0 - k.aleph1 * dt - 0.5 * k.n * std::log(dt) - k.d * rho2;
}

double upper_envelope(const BoundConstants& k, const KernelQuery& qy) {
  return std::exp(log_upper_envelope(k, qy.dt(), qy.rho2() / qy.dt()));
}

double lower_envelope(const BoundConstants& k, const KernelQuery& qy) {
  return std::exp(log_lower_envelope(k, qy.dt(), qy.rho2() / qy.dt()));
}

double log_phi1_envelope(const BoundConstants& k, double dt, double rho2) {
  return k.log_C - (0.5 * k.n + 1.0 - k.beta) * std::log(dt) - k.c * rho2;
}

double log_phi_ell_envelope(const BoundConstants& k, int ell, double dt, double rho2,
                            EnvelopeVariant variant) {
  if (ell < 1) throw std::invalid_argument("log_phi_ell_envelope: ell must be >= 1");
  double power = variant == EnvelopeVariant::PerTermPower ? ell * k.beta : k.beta;
  return -std::log(k.Ctilde) + ell * k.log_Lambda - log_gamma(ell * k.beta) -
         (0.5 * k.n + 1.0 - power) * std::log(dt) - k.c * rho2;
}

double log_phi_series_envelope(const BoundConstants& k, double dt, double rho2) {
  return k.log_S - (0.5 * k.n + 1.0 - k.beta) * std::log(dt) - k.c * rho2;
}

double log_correction_envelope(const BoundConstants& k, double dt, double rho2) {
  double log_B = -std::log(k.beta);
  return k.log_S + log_B - 0.5 * k.n * std::log(k.kappa * k.c) +
         (-0.5 * k.n + k.beta) * std::log(dt) - k.c * rho2;
}

double log_series_tail(const BoundConstants& k, int ell_from, double dt, double rho2) {
  if (ell_from < 1) ell_from = 1;
  double log_growth = k.log_Lambda + k.beta * std::log(dt);
  double tail = log_series_sum(log_growth, k.beta, ell_from);
  if (tail == kNegInf) return kNegInf;
  return -std::log(k.Ctilde) + tail - (0.5 * k.n + 1.0) * std::log(dt) - k.c * rho2;
}

EpsilonConstants epsilon_upper_constants(const CoefficientField& field, double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("epsilon_upper_constants: eps must lie in (0, 1)");
  EpsilonConstants e;
  e.eps = eps;
  e.c_eps = eps / (4.0 * field.M());
  double c_damp = 1.0 / (4.0 * field.M()) - e.c_eps;  // = (1 - eps)/(4M)
  e.pipeline = compute_with_rates(field, e.c_eps, c_damp);
  e.aleph2_eps = e.pipeline.aleph2;
  e.aleph3_eps = e.pipeline.aleph3;
  e.log_aleph2_eps = e.pipeline.log_aleph2;
  return e;
}

double log_upper_envelope_eps(const EpsilonConstants& e, int n, double dt, double rho2) {
  return e.log_aleph2_eps + e.aleph3_eps * dt - 0.5 * n * std::log(dt) - e.c_eps * rho2;
}

double shape_exponent(double alpha) { return (4.0 * alpha + 8.0) / (3.0 * alpha + 4.0); }

double log_precise_upper_envelope(const CoefficientField& field, double dt, double rho2,
                                  double c1, double c2) {
  if (!field.b_is_zero() || !field.q_is_zero())
    throw std::invalid_argument(
        "precise_upper_envelope: requires a field declared with b = 0 and q = 0");
  if (!(c1 > 0.0) || !(c2 > 0.0))
    throw std::invalid_argument("precise_upper_envelope: c1, c2 must be positive");
  int n = field.n();
  double alpha = field.alpha();
  double gamma = shape_exponent(alpha);
  double rho = std::sqrt(rho2);
  double base = -0.5 * n * std::log(4.0 * field.kappa() * kPi) - 0.5 * n * std::log(dt) -
                rho2 / (4.0 * field.M());
  double log_corr = std::log(c1) + 0.5 * alpha * std::log(dt) +
                    c2 * (dt + std::pow(rho, gamma));
  // 1 + exp(log_corr), folded in logs so a huge correction term cannot overflow.
  return base + logsumexp2(0.0, log_corr);
}

double precise_upper_envelope(const CoefficientField& field, const KernelQuery& qy, double c1,
                              double c2) {
  return std::exp(
      log_precise_upper_envelope(field, qy.dt(), qy.rho2() / qy.dt(), c1, c2));
}

TwoSidedReport check_two_sided(const CoefficientField& field,
                               const std::vector<std::pair<KernelQuery, double>>& values,
                               const BoundConstants& k, double slack) {
  (void)field;
  TwoSidedReport rep;
  rep.entries.reserve(values.size());
  rep.worst_margin_low = std::numeric_limits<double>::infinity();
  rep.worst_margin_high = std::numeric_limits<double>::infinity();
  for (const auto& [qy, value] : values) {
    QueryMargin m;
    m.dt = qy.dt();
    m.rho2 = qy.rho2() / qy.dt();
    double log_low = log_lower_envelope(k, m.dt, m.rho2);
    double log_up = log_upper_envelope(k, m.dt, m.rho2);
    m.log_value = value > 0.0 ? std::log(value) : kNegInf;

    if (log_low == kNegInf) {
      // Lower envelope underflowed to zero: any nonnegative value passes.
      m.pass_low = value >= 0.0;
      m.margin_low = m.log_value == kNegInf ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      m.margin_low = m.log_value - log_low;
      m.pass_low = value > 0.0 && m.margin_low >= -slack;
    }
    if (m.log_value == kNegInf) {
      // Value underflowed to zero (or is nonpositive): never above the upper
      // envelope, but a negative value is still a lower-side failure above.
      m.pass_high = true;
      m.margin_high = std::numeric_limits<double>::infinity();
    } else {
      m.margin_high = log_up - m.log_value;
      m.pass_high = m.margin_high >= -slack;
    }
    if (!m.pass_low || !m.pass_high) ++rep.violations;
    if (std::isfinite(m.margin_low))
      rep.worst_margin_low = std::min(rep.worst_margin_low, m.margin_low);
    if (std::isfinite(m.margin_high))
      rep.worst_margin_high = std::min(rep.worst_margin_high, m.margin_high);
    rep.entries.push_back(m);
  }
  if (!std::isfinite(rep.worst_margin_low)) rep.worst_margin_low = 0.0;
  if (!std::isfinite(rep.worst_margin_high)) rep.worst_margin_high = 0.0;
  return rep;
}

std::vector<std::vector<double>> build_chain(const std::vector<double>& x,
                                             const std::vector<double>& xi, int m) {
  if (m < 1) throw std::invalid_argument("build_chain: m must be >= 1");
  if (x.size() != xi.size()) throw std::invalid_argument("build_chain: dimension mismatch");
  std::vector<std::vector<double>> chain;
  chain.reserve(m + 1);
  for (int kk = 0; kk <= m; ++kk) {
    if (kk == 0) {
      chain.push_back(x);
    } else if (kk == m) {
      chain.push_back(xi);
    } else {
      std::vector<double> p(x.size());
      double s = static_cast<double>(kk) / m;
      for (std::size_t i = 0; i < x.size(); ++i) p[i] = x[i] + s * (xi[i] - x[i]);
      chain.push_back(std::move(p));
    }
  }
  return chain;
}

int smallest_chain_m(double dist2, double kappa, double dt) {
  if (!(kappa > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("smallest_chain_m: kappa and dt must be positive");
  double m_real = 4.0 * dist2 / (kappa * dt);
  int m = static_cast<int>(std::ceil(m_real - 1e-12));
  return std::max(2, m);
}

std::string constants_to_json(const BoundConstants& k) {
  nlohmann::ordered_json j;
  auto put = [&](const char* name, double value, const char* formula) {
    nlohmann::ordered_json e;
    if (std::isfinite(value)) {
      e["value"] = value;
    } else {
      std::ostringstream os;
      os << value;
      e["value"] = os.str();
    }
    e["formula"] = formula;
    j[name] = e;
  };
  j["inputs"] = {{"n", k.n},   {"alpha", k.alpha}, {"kappa", k.kappa},
                 {"M", k.M},   {"N1", k.N1},       {"N2", k.N2}};
  put("beta", k.beta, "alpha/2");
  put("c", k.c, "1/(8*M)");
  put("C", k.C,
      "(4*kappa*pi)^(-n/2) * max_{lambda>0} [N1*(1/(2*kappa)+lambda^2/(4*kappa^2))"
      "*(1+lambda^2)^(alpha/2) + N2*(lambda/kappa+1)] * exp(-c*lambda^2)");
  put("Ctilde", k.Ctilde, "(4*pi/c)^(n/2)");
  put("Cbar", k.Cbar, "1/Ctilde");
  put("Lambda", k.Lambda, "C*Ctilde*Gamma(beta)");
  put("S", k.S, "C + Cbar*sum_{l>=2} Lambda^l/Gamma(l*beta)");
  put("log_S", k.log_S, "ln S");
  put("Chat", k.Chat, "(4*kappa*pi)^(-n/2) + S*B(1,beta)/(kappa*c)^(n/2)");
  put("mu", k.mu, "exp(-1)/(2*(4*pi*M)^(n/2))");
  put("delta", k.delta,
      "min(1, [exp(-1)*(4*pi*M)^(-n/2)*(kappa*c)^(n/2)/(2*S*B(1,beta))]^(1/beta))");
  put("log_delta", k.log_delta, "ln delta");
  put("nu", k.nu, "kappa^(n/2)/(e*M^(n/2)*2^(3*n)*Gamma(n/2+1))");
  put("C0", k.C0, "min(mu, kappa^(-n/2)*nu)");
  put("d", k.d, "4*|ln nu|/kappa");
  put("aleph0", k.aleph0, "Ctilde^(-1)*exp(min(0, ln(Ctilde*C0)))");
  put("aleph1", k.aleph1, "-min(0, ln(Ctilde*C0)/delta)");
  put("aleph2", k.aleph2, "Ctilde^(-1)*exp(max(0, ln(Ctilde*Chat)))");
  put("aleph3", k.aleph3, "max(0, ln(Ctilde*Chat))");
  return j.dump(2);
}

}  // namespace levi
