#include "levi/grid.hpp"

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "levi/quadrature.hpp"

namespace levi {

namespace {

// Catmull-Rom weights for fraction s in [0,1] over nodes p0..p3 (value lands
// between p1 and p2); exact reproduction at s = 0 and s = 1.
inline void catmull_rom_weights(double s, double w[4]) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  w[0] = 0.5 * (-s3 + 2.0 * s2 - s);
  w[1] = 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0);
  w[2] = 0.5 * (-3.0 * s3 + 4.0 * s2 + s);
  w[3] = 0.5 * (s3 - s2);
}

inline void linear_weights(double s, double w[4]) {
  w[0] = 0.0;
  w[1] = 1.0 - s;
  w[2] = s;
  w[3] = 0.0;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

}  // namespace

GridKernel::GridKernel(GridSpec spec, std::vector<double> base, double tau, double t_max)
    : spec_(spec), base_(std::move(base)), tau_(tau), t_max_(t_max) {
  if (base_.empty()) throw std::invalid_argument("GridKernel: dimension must be >= 1");
  if (!(t_max_ > tau_)) throw std::invalid_argument("GridKernel: horizon must exceed base time");
  if (spec_.time_slices < 4) throw std::invalid_argument("GridKernel: need at least 4 time slices");
  if (!(spec_.spacing > 0.0) || !(spec_.halfwidth >= spec_.spacing))
    throw std::invalid_argument("GridKernel: invalid spatial lattice");
  const int half = static_cast<int>(std::ceil(spec_.halfwidth / spec_.spacing));
  ny_ = 2 * half + 1;
  y0_ = -half * spec_.spacing;
  inv_h_ = 1.0 / spec_.spacing;
  spatial_count_ = 1;
  for (int d = 0; d < dim(); ++d) spatial_count_ *= static_cast<std::size_t>(ny_);
  values_.assign(static_cast<std::size_t>(spec_.time_slices + 1) * spatial_count_, 0.0);
}

double GridKernel::y_coord(int axis_index) const { return y0_ + axis_index * spec_.spacing; }

double GridKernel::sigma_of_row(int j) const {
  const double v = static_cast<double>(j) / spec_.time_slices;
  return tau_ + (t_max_ - tau_) * graded_map(v, spec_.grading);
}

double GridKernel::node(int j, std::size_t flat) const {
  return values_[static_cast<std::size_t>(j) * spatial_count_ + flat];
}

double& GridKernel::node(int j, std::size_t flat) {
  return values_[static_cast<std::size_t>(j) * spatial_count_ + flat];
}

void GridKernel::fill(const ScaledFiller& f) {
  const int n = dim();
  const int nt = spec_.time_slices;
  const long long total = static_cast<long long>(nt) * static_cast<long long>(spatial_count_);
#pragma omp parallel for schedule(static)
  for (long long task = 0; task < total; ++task) {
    const int j = 1 + static_cast<int>(task / static_cast<long long>(spatial_count_));
    std::size_t flat = static_cast<std::size_t>(task % static_cast<long long>(spatial_count_));
    const double sigma = sigma_of_row(j);
    const double root = std::sqrt(sigma - tau_);
    std::vector<double> eta(static_cast<std::size_t>(n));
    std::size_t rem = flat;
    for (int d = n - 1; d >= 0; --d) {
      const int k = static_cast<int>(rem % static_cast<std::size_t>(ny_));
      rem /= static_cast<std::size_t>(ny_);
      eta[static_cast<std::size_t>(d)] = base_[static_cast<std::size_t>(d)] + y_coord(k) * root;
    }
    values_[static_cast<std::size_t>(j) * spatial_count_ + flat] = f(eta, sigma);
  }
  // Row 0 sits at the singular time; the scaled profile is continued flat from
  // the first interior row (it changes on the scale of one graded step there).
  for (std::size_t flat = 0; flat < spatial_count_; ++flat) values_[flat] = values_[spatial_count_ + flat];
}

double GridKernel::interpolate(const double* y, double v) const {
  const int n = dim();
  const int nt = spec_.time_slices;
  double wt[4];
  double ws[4 * 8];  // per-axis spatial weights (supports n <= 8)
  int base_idx[8];
  if (n > 8) throw std::invalid_argument("GridKernel: dimension larger than supported");

  // Time axis.
  double g = v * nt;
  if (g < 0.0) g = 0.0;
  if (g > static_cast<double>(nt)) g = static_cast<double>(nt);
  int jf = static_cast<int>(std::floor(g));
  if (jf > nt - 1) jf = nt - 1;
  const double st = g - jf;
  if (spec_.cubic)
    catmull_rom_weights(st, wt);
  else
    linear_weights(st, wt);

  // Spatial axes; fully outside the window -> 0.
  for (int d = 0; d < n; ++d) {
    const double gx = (y[d] - y0_) * inv_h_;
    if (gx < 0.0 || gx > static_cast<double>(ny_ - 1)) return 0.0;
    int kf = static_cast<int>(std::floor(gx));
    if (kf > ny_ - 2) kf = ny_ - 2;
    const double ss = gx - kf;
    if (spec_.cubic)
      catmull_rom_weights(ss, ws + 4 * d);
    else
      linear_weights(ss, ws + 4 * d);
    base_idx[d] = kf;
  }

  // Tensor gather: 4 time rows x 4^n spatial stencil (odometer over offsets).
  double total = 0.0;
  int off[8] = {0};
  while (true) {
    double wsp = 1.0;
    std::size_t flat = 0;
    for (int d = 0; d < n; ++d) {
      const int k = clamp_index(base_idx[d] - 1 + off[d], ny_);
      wsp *= ws[4 * d + off[d]];
      flat = flat * static_cast<std::size_t>(ny_) + static_cast<std::size_t>(k);
    }
    if (wsp != 0.0) {
      double acc = 0.0;
      for (int jj = 0; jj < 4; ++jj) {
        const int j = clamp_index(jf - 1 + jj, nt + 1);
        acc += wt[jj] * values_[static_cast<std::size_t>(j) * spatial_count_ + flat];
      }
      total += wsp * acc;
    }
    int d = 0;
    for (; d < n; ++d) {
      if (++off[d] < 4) break;
      off[d] = 0;
    }
    if (d == n) break;
  }
  return total;
}

double GridKernel::scaled_value(std::span<const double> y, double v) const {
  if (static_cast<int>(y.size()) != dim())
    throw std::invalid_argument("GridKernel: coordinate dimension mismatch");
  return interpolate(y.data(), v);
}

double GridKernel::raw_value(std::span<const double> eta, double sigma) const {
  if (static_cast<int>(eta.size()) != dim())
    throw std::invalid_argument("GridKernel: coordinate dimension mismatch");
  const double gap = sigma - tau_;
  if (!(gap > 0.0)) throw std::domain_error("GridKernel: query time at or before the base time");
  if (!covers(sigma)) throw std::domain_error("GridKernel: query time beyond stored horizon");
  double u = gap / (t_max_ - tau_);
  if (u > 1.0) u = 1.0;
  const double v = graded_map_inverse(u, spec_.grading);
  const double root = std::sqrt(gap);
  double y[8];
  if (dim() > 8) throw std::invalid_argument("GridKernel: dimension larger than supported");
  for (int d = 0; d < dim(); ++d) y[d] = (eta[static_cast<std::size_t>(d)] - base_[static_cast<std::size_t>(d)]) / root;
  const double w = interpolate(y, v);
  if (w == 0.0) return 0.0;
  return w * std::pow(gap, -spec_.time_power);
}

double GridKernel::max_abs_scaled() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void GridKernel::accumulate(const GridKernel& other) {
  if (other.dim() != dim() || other.ny_ != ny_ || other.spec_.time_slices != spec_.time_slices ||
      other.tau_ != tau_ || other.t_max_ != t_max_ || other.base_ != base_ ||
      other.spec_.spacing != spec_.spacing || other.spec_.time_power != spec_.time_power ||
      other.spec_.grading != spec_.grading)
    throw std::invalid_argument("GridKernel: accumulate requires an identical lattice");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

void GridKernel::write_csv(std::ostream& os) const {
  char buf[64];
  os << "# levi-grid-kernel v1\n";
  os << "# dim=" << dim() << "\n";
  os << "# base=";
  for (int d = 0; d < dim(); ++d) {
    std::snprintf(buf, sizeof buf, "%.17g", base_[static_cast<std::size_t>(d)]);
    os << (d ? "," : "") << buf;
  }
  os << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", tau_);
  os << "# tau=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", t_max_);
  os << "# t_max=" << buf << "\n";
  os << "# time_slices=" << spec_.time_slices << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec_.spacing);
  os << "# spacing=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec_.halfwidth);
  os << "# halfwidth=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec_.time_power);
  os << "# time_power=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g", spec_.grading);
  os << "# grading=" << buf << "\n";
  os << "# cubic=" << (spec_.cubic ? 1 : 0) << "\n";
  os << "# columns=time_index,spatial_flat_index,scaled_value\n";
  for (int j = 0; j <= spec_.time_slices; ++j)
    for (std::size_t flat = 0; flat < spatial_count_; ++flat) {
      std::snprintf(buf, sizeof buf, "%.17g", node(j, flat));
      os << j << "," << flat << "," << buf << "\n";
    }
}

GridKernel GridKernel::read_csv(std::istream& is) {
  std::string line;
  GridSpec spec;
  std::vector<double> base;
  double tau = 0.0, t_max = 0.0;
  int dim = 0;
  bool magic = false;

  auto value_of = [](const std::string& l) { return l.substr(l.find('=') + 1); };

  // Header.
  while (std::getline(is, line)) {
    if (line.rfind("# levi-grid-kernel", 0) == 0) {
      magic = true;
      continue;
    }
    if (line.rfind("# dim=", 0) == 0)
      dim = std::stoi(value_of(line));
    else if (line.rfind("# base=", 0) == 0) {
      std::stringstream ss(value_of(line));
      std::string tok;
      while (std::getline(ss, tok, ',')) base.push_back(std::stod(tok));
    } else if (line.rfind("# tau=", 0) == 0)
      tau = std::stod(value_of(line));
    else if (line.rfind("# t_max=", 0) == 0)
      t_max = std::stod(value_of(line));
    else if (line.rfind("# time_slices=", 0) == 0)
      spec.time_slices = std::stoi(value_of(line));
    else if (line.rfind("# spacing=", 0) == 0)
      spec.spacing = std::stod(value_of(line));
    else if (line.rfind("# halfwidth=", 0) == 0)
      spec.halfwidth = std::stod(value_of(line));
    else if (line.rfind("# time_power=", 0) == 0)
      spec.time_power = std::stod(value_of(line));
    else if (line.rfind("# grading=", 0) == 0)
      spec.grading = std::stod(value_of(line));
    else if (line.rfind("# cubic=", 0) == 0)
      spec.cubic = std::stoi(value_of(line)) != 0;
    else if (line.rfind("# columns=", 0) == 0)
      break;
    else if (!line.empty() && line[0] != '#')
      throw std::runtime_error("GridKernel: malformed header line: " + line);
  }
  if (!magic) throw std::runtime_error("GridKernel: missing format marker");
  if (dim <= 0 || static_cast<int>(base.size()) != dim)
    throw std::runtime_error("GridKernel: inconsistent dimension in header");

  GridKernel g(spec, std::move(base), tau, t_max);
  std::size_t rows = 0;
  const std::size_t expected =
      static_cast<std::size_t>(spec.time_slices + 1) * g.spatial_count_;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    if (!std::getline(ss, tok, ',')) throw std::runtime_error("GridKernel: bad data row");
    const int j = std::stoi(tok);
    if (!std::getline(ss, tok, ',')) throw std::runtime_error("GridKernel: bad data row");
    const std::size_t flat = static_cast<std::size_t>(std::stoull(tok));
    if (!std::getline(ss, tok, ',')) throw std::runtime_error("GridKernel: bad data row");
    if (j < 0 || j > spec.time_slices || flat >= g.spatial_count_)
      throw std::runtime_error("GridKernel: node index out of range");
    g.node(j, flat) = std::stod(tok);
    ++rows;
  }
  if (rows != expected) throw std::runtime_error("GridKernel: node count mismatch");
  return g;
}

}  // namespace levi
