// Sampled space-time kernels with a fixed base point, stored in self-similar
// coordinates so one lattice covers gaps from ~1e-7 up to the full horizon:
//
//   time:  uniform lattice v_j = j/nt, mapped to sigma = tau + (t_max-tau) *
//          grade(v) with grade clustering nodes at both ends;
//   space: uniform lattice in y = (eta - xi) / sqrt(sigma - tau), the frame in
//          which a Gaussian kernel has constant width;
//   value: w = F(eta, sigma) * (sigma - tau)^time_power, the combination that
//          stays bounded for kernels with an integrable time singularity.
//
// Interpolation is tensor Catmull-Rom (or multilinear), exact at nodes;
// spatial queries beyond the stored window return 0 (the stored kernels decay
// like Gaussians there). CSV round-tripping is provided so CLI invocations can
// cache the expensive fills.
#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace levi {

struct GridSpec {
  int time_slices = 48;     // lattice has time_slices+1 rows; row 0 sits at sigma = tau
  double spacing = 0.25;    // y-lattice step per axis
  double halfwidth = 12.0;  // y covers [-halfwidth, halfwidth] per axis
  double time_power = 0.0;  // scaling exponent in w = F * (sigma-tau)^time_power
  double grading = 4.0;     // exponent of the v -> u endpoint-clustering map
  bool cubic = true;        // Catmull-Rom when true, multilinear otherwise
};

class GridKernel {
 public:
  // Fill callback: returns the SCALED value w at (eta, sigma); the grid never
  // un-scales during fill, so callers control overflow behavior.
  using ScaledFiller = std::function<double(std::span<const double> eta, double sigma)>;

  GridKernel(GridSpec spec, std::vector<double> base, double tau, double t_max);

  void fill(const ScaledFiller& f);

  int dim() const { return static_cast<int>(base_.size()); }
  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& base() const { return base_; }
  double tau() const { return tau_; }
  double t_max() const { return t_max_; }
  int nodes_per_axis() const { return ny_; }
  std::size_t node_count() const { return values_.size(); }
  bool covers(double sigma) const { return sigma > tau_ && sigma <= t_max_ * (1.0 + 1e-12); }

  // F(eta, sigma) reconstructed from the stored scaled values.
  double raw_value(std::span<const double> eta, double sigma) const;
  // Interpolated scaled value at (y, v) lattice coordinates.
  double scaled_value(std::span<const double> y, double v) const;

  // Direct node accessors (time row j = 0..time_slices, flat spatial index).
  double node(int j, std::size_t flat) const;
  double& node(int j, std::size_t flat);
  std::size_t spatial_count() const { return spatial_count_; }
  double y_coord(int axis_index) const;  // lattice coordinate of spatial index along one axis
  double sigma_of_row(int j) const;

  double max_abs_scaled() const;

  // Pointwise sum with a grid on the identical lattice.
  void accumulate(const GridKernel& other);

  void write_csv(std::ostream& os) const;
  static GridKernel read_csv(std::istream& is);

 private:
  double interpolate(const double* y, double v) const;

  GridSpec spec_;
  std::vector<double> base_;
  double tau_ = 0.0;
  double t_max_ = 0.0;
  int ny_ = 0;                   // nodes per spatial axis
  double y0_ = 0.0;              // first lattice coordinate (-halfwidth)
  double inv_h_ = 0.0;           // 1 / spacing
  std::size_t spatial_count_ = 0;
  std::vector<double> values_;   // (time_slices+1) * spatial_count_, time-major
};

}  // namespace levi
