#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "qsm/common.hpp"

namespace qsm {

/// Observation directions on the unit circle (Dim=2) or sphere (Dim=3),
/// together with the equal-weight surface element used by the discrete
/// indicators.
template <int Dim>
struct DirectionSet {
  std::vector<Vec<Dim>> directions;
  double weight = 0.0;

  std::size_t size() const { return directions.size(); }
  const Vec<Dim>& operator[](std::size_t l) const { return directions[l]; }
};

/// Equispaced circle points (cos 2l pi/L, sin 2l pi/L), l = 0..L-1.
inline DirectionSet<2> theta_circle(int count) {
  require(count >= 1, "theta_circle: L must be >= 1");
  DirectionSet<2> set;
  set.directions.reserve(count);
  for (int l = 0; l < count; ++l) {
    const double angle = 2.0 * pi * l / count;
    set.directions.emplace_back(std::cos(angle), std::sin(angle));
  }
  set.weight = 2.0 * pi / count;
  return set;
}

/// Fibonacci lattice on the sphere, l = 1..L. The last point is the south
/// pole since x3 = 1 - 2L/L = -1.
inline DirectionSet<3> fibonacci_sphere(int count) {
  require(count >= 1, "fibonacci_sphere: L must be >= 1");
  DirectionSet<3> set;
  set.directions.reserve(count);
  const double golden = (std::sqrt(5.0) - 1.0) * pi;
  for (int l = 1; l <= count; ++l) {
    const double x3 = 1.0 - 2.0 * l / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - x3 * x3));
    set.directions.emplace_back(rho * std::cos(golden * l), rho * std::sin(golden * l), x3);
  }
  set.weight = 4.0 * pi / count;
  return set;
}

/// Circular frequencies (or wavenumbers) m * delta for m = 1..count.
struct FrequencyGrid {
  double delta = 0.0;
  int count = 0;

  double operator[](int m) const { return m * delta; }  // m is 1-based
  double max() const { return count * delta; }
};

inline FrequencyGrid frequency_grid(double delta, int count) {
  require(delta > 0.0 && std::isfinite(delta), "frequency_grid: delta must be > 0");
  require(count >= 1, "frequency_grid: count must be >= 1");
  return {delta, count};
}

/// Restricts a 3D box to the plane x[axis] = offset.
struct Slice {
  int axis = 0;
  double offset = 0.0;
};

/// Axis-aligned lattice lo + i*h. Nodes are enumerated row-major over the
/// free axes with the last free axis fastest. Only bounds and spacing are
/// stored; node coordinates are computed on demand.
template <int Dim>
class SamplingGrid {
 public:
  SamplingGrid(Vec<Dim> lo, Vec<Dim> hi, double h, std::optional<Slice> slice = std::nullopt)
      : lo_(lo), hi_(hi), h_(h), slice_(slice) {
    require(h > 0.0 && std::isfinite(h), "sampling grid: spacing must be > 0");
    for (int a = 0; a < Dim; ++a) {
      require(hi[a] > lo[a], "sampling grid: degenerate bounds");
    }
    if (slice_) {
      require(Dim == 3, "sampling grid: slices apply to 3D boxes only");
      require(slice_->axis >= 0 && slice_->axis < Dim, "sampling grid: bad slice axis");
      require(slice_->offset >= lo[slice_->axis] && slice_->offset <= hi[slice_->axis],
              "sampling grid: slice offset outside bounds");
    }
    for (int a = 0; a < Dim; ++a) {
      counts_[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / h + 1e-9)) + 1;
      if (!slice_ || slice_->axis != a) free_axes_.push_back(a);
    }
  }

  const Vec<Dim>& lo() const { return lo_; }
  const Vec<Dim>& hi() const { return hi_; }
  double spacing() const { return h_; }
  const std::optional<Slice>& slice() const { return slice_; }
  const std::vector<int>& free_axes() const { return free_axes_; }

  /// Number of lattice points along an axis of the full box.
  int count(int axis) const { return counts_[axis]; }

  /// Coordinate of lattice index i along an axis.
  double coordinate(int axis, int i) const { return lo_[axis] + i * h_; }

  std::vector<double> axis_points(int axis) const {
    std::vector<double> pts(counts_[axis]);
    for (int i = 0; i < counts_[axis]; ++i) pts[i] = coordinate(axis, i);
    return pts;
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (int a : free_axes_) n *= static_cast<std::size_t>(counts_[a]);
    return n;
  }

  /// Measure of one lattice cell in the free dimensions.
  double cell_volume() const { return std::pow(h_, static_cast<double>(free_axes_.size())); }

  Vec<Dim> node(std::size_t index) const {
    Vec<Dim> z;
    if (slice_) z[slice_->axis] = slice_->offset;
    for (auto it = free_axes_.rbegin(); it != free_axes_.rend(); ++it) {
      const int a = *it;
      z[a] = coordinate(a, static_cast<int>(index % counts_[a]));
      index /= counts_[a];
    }
    return z;
  }

  bool operator==(const SamplingGrid& o) const {
    return lo_ == o.lo_ && hi_ == o.hi_ && h_ == o.h_ && slice_.has_value() == o.slice_.has_value() &&
           (!slice_ || (slice_->axis == o.slice_->axis && slice_->offset == o.slice_->offset));
  }

 private:
  Vec<Dim> lo_, hi_;
  double h_;
  std::optional<Slice> slice_;
  std::array<int, Dim> counts_{};
  std::vector<int> free_axes_;
};

template <int Dim>
SamplingGrid<Dim> cartesian_grid(const Vec<Dim>& lo, const Vec<Dim>& hi, double h) {
  return SamplingGrid<Dim>(lo, hi, h);
}

/// Planar cut x[axis] = offset of a 3D box; axis is 0-based.
inline SamplingGrid<3> plane_slice(const Vec3& lo, const Vec3& hi, int axis, double offset, double h) {
  return SamplingGrid<3>(lo, hi, h, Slice{axis, offset});
}

}  // namespace qsm
