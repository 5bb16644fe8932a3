#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qsm/common.hpp"
#include "qsm/geometry.hpp"
#include "qsm/indicators.hpp"
#include "qsm/sources.hpp"

namespace qsm {

/// Node-major reference values on a grid, same layout as IndicatorField.
struct ReferenceField {
  int arity = 1;
  std::vector<complex> values;
};

template <int Dim>
ReferenceField reference_from_source(const SourceSpec<Dim>& spec, const SamplingGrid<Dim>& grid) {
  ReferenceField ref{spec.components(), std::vector<complex>(grid.size() * spec.components())};
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto v = eval_source(spec, grid.node(n));
    for (int c = 0; c < ref.arity; ++c) ref.values[n * ref.arity + c] = v[c];
  }
  return ref;
}

/// Analytic derivative of the source on the grid, multiplied by `sign`.
template <int Dim>
ReferenceField reference_from_derivative(const SourceSpec<Dim>& spec, const SamplingGrid<Dim>& grid,
                                         DerivativeKind kind, double sign = 1.0) {
  ReferenceField ref;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const auto d = eval_derivative(spec, grid.node(n), kind);
    if (n == 0) {
      ref.arity = static_cast<int>(d.value.size());
      ref.values.resize(grid.size() * ref.arity);
    }
    for (int c = 0; c < ref.arity; ++c) ref.values[n * ref.arity + c] = sign * d.value[c];
  }
  return ref;
}

template <int Dim>
ReferenceField reference_from_field(const IndicatorField<Dim>& field) {
  return {field.arity, field.values};
}

/// Nodes within `band` of the boundary of `shape` are left out.
template <int Dim>
struct RegionFilter {
  std::optional<SupportShape<Dim>> shape;
  double band = 0.0;

  bool keeps(const Vec<Dim>& z) const { return !shape || shape->boundary_distance(z) > band; }
};

struct ErrorOptions {
  bool real_part_only = false;
};

struct L2Error {
  double total = 0.0;
  std::vector<double> per_component;
};

namespace detail {

inline double magnitude2(complex v, bool real_only) { return real_only ? v.real() * v.real() : std::norm(v); }

template <int Dim>
void require_matching(const IndicatorField<Dim>& field, const ReferenceField& ref) {
  require(field.arity == ref.arity && field.values.size() == ref.values.size(),
          "metrics: field and reference layouts differ", ErrorKind::dimension_mismatch);
}

}  // namespace detail

/// ||I - S|| / ||S|| with discrete L2 norms (node sums times cell volume),
/// aggregated over components and per component.
template <int Dim>
L2Error relative_l2_error(const IndicatorField<Dim>& field, const ReferenceField& ref, const ErrorOptions& opts = {},
                          const RegionFilter<Dim>& region = {}) {
  detail::require_matching(field, ref);
  const int C = ref.arity;
  std::vector<double> num(C, 0.0), den(C, 0.0);
  std::size_t kept = 0;
  for (std::size_t n = 0; n < field.node_count(); ++n) {
    if (!region.keeps(field.grid.node(n))) continue;
    ++kept;
    for (int c = 0; c < C; ++c) {
      const complex s = ref.values[n * C + c];
      num[c] += detail::magnitude2(field.values[n * C + c] - s, opts.real_part_only);
      den[c] += detail::magnitude2(s, opts.real_part_only);
    }
  }
  require(kept > 0, "relative_l2_error: no nodes left in the region", ErrorKind::empty_region);
  const double vol = field.grid.cell_volume();
  double num_total = 0.0, den_total = 0.0;
  L2Error out;
  for (int c = 0; c < C; ++c) {
    num_total += num[c];
    den_total += den[c];
    out.per_component.push_back(den[c] > 0.0 ? std::sqrt(num[c] / den[c]) : std::nan(""));
  }
  require(den_total * vol > 0.0, "relative_l2_error: reference norm is zero", ErrorKind::division_by_zero);
  out.total = std::sqrt(num_total / den_total);
  return out;
}

template <int Dim>
L2Error relative_l2_error(const IndicatorField<Dim>& field, const SourceSpec<Dim>& spec, const ErrorOptions& opts = {},
                          const RegionFilter<Dim>& region = {}) {
  return relative_l2_error(field, reference_from_source(spec, field.grid), opts, region);
}

/// Per-component mask: 1 where |(reference - field)_i| > epsilon.
template <int Dim>
std::vector<std::uint8_t> threshold_diff(const IndicatorField<Dim>& field, const ReferenceField& ref, double epsilon,
                                         const ErrorOptions& opts = {}) {
  require(epsilon > 0.0, "threshold_diff: epsilon must be > 0");
  detail::require_matching(field, ref);
  std::vector<std::uint8_t> mask(ref.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const complex d = ref.values[i] - field.values[i];
    mask[i] = (opts.real_part_only ? std::abs(d.real()) : std::abs(d)) > epsilon;
  }
  return mask;
}

/// Fraction of ones among the kept nodes (all components pooled).
template <int Dim>
double mask_fraction(const std::vector<std::uint8_t>& mask, const SamplingGrid<Dim>& grid, int arity,
                     const std::function<bool(const Vec<Dim>&)>& inside = {}) {
  std::size_t ones = 0, total = 0;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (inside && !inside(grid.node(n))) continue;
    for (int c = 0; c < arity; ++c) ones += mask[n * arity + c], ++total;
  }
  require(total > 0, "mask_fraction: no nodes selected", ErrorKind::empty_region);
  return static_cast<double>(ones) / total;
}

/// Largest nodal error over nodes farther than `band` from the boundary.
template <int Dim>
double region_restricted_sup(const IndicatorField<Dim>& field, const ReferenceField& ref,
                             const SupportShape<Dim>& shape, double band, const ErrorOptions& opts = {}) {
  require(band >= 0.0, "region_restricted_sup: band must be >= 0");
  detail::require_matching(field, ref);
  const RegionFilter<Dim> region{shape, band};
  double sup = 0.0;
  std::size_t kept = 0;
  for (std::size_t n = 0; n < field.node_count(); ++n) {
    if (band > 0.0 && !region.keeps(field.grid.node(n))) continue;
    ++kept;
    for (int c = 0; c < ref.arity; ++c) {
      const complex d = field.values[n * ref.arity + c] - ref.values[n * ref.arity + c];
      sup = std::max(sup, opts.real_part_only ? std::abs(d.real()) : std::abs(d));
    }
  }
  require(kept > 0, "region_restricted_sup: no nodes farther than the band from the boundary",
          ErrorKind::empty_region);
  return sup;
}

struct ParameterSnapshot {
  int L = 0;
  int Lambda = 0;
  double delta_freq = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;

  double omega_max() const { return Lambda * delta_freq; }
};

struct MetricsReport {
  double e_F = 0.0;
  double e_F_std = 0.0;  // spread over seed replicates, 0 for a single run
  int replicates = 1;
  std::vector<double> e_F_components;
  double sup_error_interior = std::nan("");
  double threshold_mask_fraction = std::nan("");
  double exclude_band = 0.0;
  bool real_part_only = false;
  ParameterSnapshot params;
};

/// Mean and sample standard deviation of e_F over seed replicates. The
/// snapshot of the first report is kept.
inline MetricsReport aggregate_replicates(const std::vector<MetricsReport>& runs) {
  require(!runs.empty(), "aggregate_replicates: no runs");
  MetricsReport out = runs.front();
  const double n = static_cast<double>(runs.size());
  double mean = 0.0;
  for (const auto& r : runs) mean += r.e_F;
  mean /= n;
  double var = 0.0;
  for (const auto& r : runs) var += (r.e_F - mean) * (r.e_F - mean);
  out.e_F = mean;
  out.e_F_std = runs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  out.replicates = static_cast<int>(runs.size());
  for (std::size_t c = 0; c < out.e_F_components.size(); ++c) {
    double s = 0.0;
    for (const auto& r : runs) s += r.e_F_components.at(c);
    out.e_F_components[c] = s / n;
  }
  return out;
}

enum class TrendAxis { L, omega_max, delta_omega, delta };

inline const char* to_string(TrendAxis a) {
  switch (a) {
    case TrendAxis::L: return "L";
    case TrendAxis::omega_max: return "omega_max";
    case TrendAxis::delta_omega: return "delta_omega";
    case TrendAxis::delta: return "delta";
  }
  return "?";
}

inline TrendAxis trend_axis_from_string(const std::string& s) {
  for (auto a : {TrendAxis::L, TrendAxis::omega_max, TrendAxis::delta_omega, TrendAxis::delta})
    if (s == to_string(a)) return a;
  throw Error(ErrorKind::config, "unknown sweep axis '" + s + "'");
}

struct TrendVerdict {
  bool monotone = true;
  std::optional<std::size_t> violation;  // index (in trend order) of the first rise
  std::vector<std::size_t> order;        // report indices from least to most favorable
};

/// Checks that e_F does not increase as the axis moves toward more data
/// (larger L or omega_max, smaller delta_omega or noise). A rise is
/// tolerated up to one replicate standard deviation.
inline TrendVerdict trend_report(const std::vector<MetricsReport>& sweep, TrendAxis axis) {
  require(sweep.size() >= 2, "trend_report: need at least two reports");
  auto value = [axis](const ParameterSnapshot& p) {
    switch (axis) {
      case TrendAxis::L: return static_cast<double>(p.L);
      case TrendAxis::omega_max: return p.omega_max();
      case TrendAxis::delta_omega: return -p.delta_freq;
      case TrendAxis::delta: return -p.noise;
    }
    return 0.0;
  };
  const auto& p0 = sweep.front().params;
  for (const auto& r : sweep) {
    const auto& p = r.params;
    const bool same_L = axis == TrendAxis::L || p.L == p0.L;
    const bool same_w = axis == TrendAxis::omega_max ||
                        std::abs(p.omega_max() - p0.omega_max()) <= 1e-12 * std::max(1.0, p0.omega_max());
    const bool same_dw = axis == TrendAxis::delta_omega || p.delta_freq == p0.delta_freq;
    const bool same_n = axis == TrendAxis::delta || p.noise == p0.noise;
    require(same_L && same_w && same_dw && same_n,
            std::string("trend_report: reports differ in parameters other than ") + to_string(axis));
  }
  TrendVerdict v;
  v.order.resize(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) v.order[i] = i;
  std::stable_sort(v.order.begin(), v.order.end(),
                   [&](std::size_t a, std::size_t b) { return value(sweep[a].params) < value(sweep[b].params); });
  for (std::size_t i = 1; i < v.order.size(); ++i) {
    const auto& prev = sweep[v.order[i - 1]];
    const auto& cur = sweep[v.order[i]];
    const double slack = std::max(prev.e_F_std, cur.e_F_std);
    if (cur.e_F > prev.e_F + slack) {
      v.monotone = false;
      v.violation = i;
      break;
    }
  }
  return v;
}

}  // namespace qsm
