#include "levi/quadrature.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>

namespace levi {

namespace {

GaussRule compute_gauss_legendre(int m) {
  if (m < 1) throw std::invalid_argument("gauss_legendre: node count must be >= 1");
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(m));
  rule.weights.resize(static_cast<std::size_t>(m));
  const int half = (m + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-based initial guess for the i-th root of P_m.
    double x = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Evaluate P_m(x) and P'_m(x) by the three-term recurrence.
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = -x;  // ascending order
    rule.weights[static_cast<std::size_t>(i)] = w;
    rule.nodes[static_cast<std::size_t>(m - 1 - i)] = x;
    rule.weights[static_cast<std::size_t>(m - 1 - i)] = w;
  }
  if (m % 2 == 1) rule.nodes[static_cast<std::size_t>(m / 2)] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int m) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, compute_gauss_legendre(m)).first;
  return it->second;
}

double graded_map(double v, double p) {
  if (v <= 0.0) return 0.0;
  if (v >= 1.0) return 1.0;
  const double num = std::pow(v, p);
  const double den = num + std::pow(1.0 - v, p);
  return num / den;
}

double graded_map_derivative(double v, double p) {
  if (v <= 0.0 || v >= 1.0) return p > 1.0 ? 0.0 : (p == 1.0 ? 1.0 : HUGE_VAL);
  const double vp = std::pow(v, p);
  const double wp = std::pow(1.0 - v, p);
  const double den = vp + wp;
  // d/dv [v^p / (v^p + (1-v)^p)] = p v^(p-1) (1-v)^(p-1) / den^2
  return p * std::pow(v, p - 1.0) * std::pow(1.0 - v, p - 1.0) / (den * den);
}

double graded_map_inverse(double u, double p) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  // u = v^p/(v^p+(1-v)^p)  =>  ((1-v)/v)^p = (1-u)/u  =>  v = 1/(1+r),
  // r = ((1-u)/u)^(1/p).
  const double r = std::pow((1.0 - u) / u, 1.0 / p);
  return 1.0 / (1.0 + r);
}

double integrate_graded_01(const std::function<double(double)>& f, int time_nodes,
                           double grading_exponent) {
  const GaussRule& rule = gauss_legendre(time_nodes);
  const double p = grading_exponent;
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double v = 0.5 * (rule.nodes[i] + 1.0);
    const double jac = 0.5 * rule.weights[i];
    const double u = graded_map(v, p);
    sum += jac * graded_map_derivative(v, p) * f(u);
  }
  return sum;
}

double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> center, double half_width, int nodes_per_axis) {
  const int n = static_cast<int>(center.size());
  const GaussRule& rule = gauss_legendre(nodes_per_axis);
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  double sum = 0.0;
  // Tensor loop via odometer over idx.
  while (true) {
    double w = 1.0;
    for (int d = 0; d < n; ++d) {
      const std::size_t i = static_cast<std::size_t>(idx[static_cast<std::size_t>(d)]);
      x[static_cast<std::size_t>(d)] = center[static_cast<std::size_t>(d)] + half_width * rule.nodes[i];
      w *= half_width * rule.weights[i];
    }
    sum += w * f(x);
    int d = 0;
    for (; d < n; ++d) {
      if (++idx[static_cast<std::size_t>(d)] < nodes_per_axis) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
    if (d == n) break;
  }
  return sum;
}

}  // namespace levi
