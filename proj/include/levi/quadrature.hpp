// Quadrature building blocks shared by kernel-mass checks, the space-time
// convolutions of the Levi iteration, and the long-time composition.
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace levi {

// Node counts / geometry knobs for all quadrature in the library.
//   spatial_nodes   Gauss-Legendre points per spatial axis
//   spatial_radius_factor
//                   half-width of spatial windows in units of sqrt(2 M dt)
//   time_nodes      Gauss-Legendre points for the time integral
//   time_grading_exponent
//                   clustering strength of the time map toward both endpoints;
//                   0 means "auto": 2/beta is substituted where beta is known
struct QuadratureScheme {
  int spatial_nodes = 24;
  double spatial_radius_factor = 8.0;
  int time_nodes = 16;
  double time_grading_exponent = 0.0;

  // One refinement step: doubled resolution everywhere.
  QuadratureScheme refined() const {
    QuadratureScheme q = *this;
    q.spatial_nodes *= 2;
    q.time_nodes *= 2;
    return q;
  }
};

// Gauss-Legendre rule on [-1, 1] (Newton on the Legendre polynomial),
// memoized per node count. Thread-safe.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int m);

// Symmetric endpoint-clustering map on [0,1]:
//   grade(v) = v^p / (v^p + (1-v)^p),  grade'(0) = grade'(1) = 0 for p > 1.
// Swallows integrable endpoint singularities u^(beta-1), (1-u)^(beta-1) once
// p >= 2/beta.
double graded_map(double v, double p);
double graded_map_derivative(double v, double p);
// Inverse of graded_map (closed form).
double graded_map_inverse(double u, double p);

// Integrate f over [0,1] with the graded substitution: GL nodes in v,
// evaluated at u = grade(v) with weight grade'(v).
double integrate_graded_01(const std::function<double(double)>& f, int time_nodes,
                           double grading_exponent);

// Tensor Gauss-Legendre integral of f over the box [center_i - half, center_i + half]^n.
double integrate_box(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> center, double half_width, int nodes_per_axis);

}  // namespace levi
