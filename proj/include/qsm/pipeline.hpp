#pragma once

#include <string>
#include <vector>

#include "qsm/config.hpp"
#include "qsm/forward.hpp"
#include "qsm/indicators.hpp"
#include "qsm/metrics.hpp"

namespace qsm {

template <int Dim>
SourceSpec<Dim> source_for(const RunConfig& c) {
  if constexpr (Dim == 2) {
    return source_2d(c.source);
  } else {
    return source_3d(c.source);
  }
}

template <int Dim>
std::vector<SamplingGrid<Dim>> grids_for(const RunConfig& c) {
  require(c.dimension() == Dim, "grid dimension does not match the problem", ErrorKind::dimension_mismatch);
  const Vec<Dim> lo = Eigen::Map<const Vec<Dim>>(c.grid_lo.data());
  const Vec<Dim> hi = Eigen::Map<const Vec<Dim>>(c.grid_hi.data());
  if constexpr (Dim == 2) {
    return {cartesian_grid<2>(lo, hi, c.grid_h)};
  } else {
    std::vector<SamplingGrid<3>> out;
    for (const auto& s : c.slices) out.push_back(plane_slice(lo, hi, s.axis, s.offset, c.grid_h));
    require(!out.empty(), "3D reconstructions need at least one slice (grid.slices)", ErrorKind::config);
    return out;
  }
}

/// Noiseless data for the configured source, directions and frequencies.
template <int Dim>
FarFieldDataset<Dim> simulate_clean(const RunConfig& c) {
  require(c.dimension() == Dim, "dataset dimension does not match the problem", ErrorKind::dimension_mismatch);
  const auto spec = source_for<Dim>(c);
  if constexpr (Dim == 2) {
    return synthesize_dataset(spec, c.physics(), theta_circle(c.L), c.frequencies());
  } else {
    return synthesize_dataset(spec, c.physics(), fibonacci_sphere(c.L), c.frequencies());
  }
}

template <int Dim>
IndicatorField<Dim> reconstruct(const FarFieldDataset<Dim>& ds, IndicatorKind kind, const SamplingGrid<Dim>& grid,
                                const RunConfig& c) {
  require(indicator_dimension(kind) == Dim, std::string("indicator ") + to_string(kind) + " has the wrong dimension",
          ErrorKind::dimension_mismatch);
  if constexpr (Dim == 2) {
    switch (kind) {
      case IndicatorKind::f2d: return indicator_f_2d(ds, grid);
      case IndicatorKind::p2d: return indicator_p_2d(ds, grid);
      case IndicatorKind::s2d: return indicator_s_2d(ds, grid);
      default: break;
    }
  } else {
    switch (kind) {
      case IndicatorKind::f3d: return indicator_f_3d(ds, grid);
      case IndicatorKind::p3d: return indicator_p_3d(ds, grid);
      case IndicatorKind::s3d: return indicator_s_3d(ds, grid);
      case IndicatorKind::E: return indicator_E(ds, grid);
      case IndicatorKind::H: return indicator_H(ds, grid);
      case IndicatorKind::rho: return indicator_rho(ds, charge_density_of(source_3d(c.source)), grid);
      default: break;
    }
  }
  throw Error(ErrorKind::dimension_mismatch, std::string("indicator ") + to_string(kind) + " is not available");
}

/// Quantity an indicator converges to: the source itself, div, div_perp,
/// curl, or -curl (3D shear indicator).
inline std::string default_reference(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::p2d:
    case IndicatorKind::p3d: return "div";
    case IndicatorKind::s2d: return "div_perp";
    case IndicatorKind::s3d: return "neg_curl";
    case IndicatorKind::H: return "curl";
    default: return "source";
  }
}

template <int Dim>
ReferenceField reference_for(const SourceSpec<Dim>& spec, IndicatorKind kind, const SamplingGrid<Dim>& grid,
                             std::string name = "auto") {
  if (name == "auto") name = default_reference(kind);
  if (name == "source") return reference_from_source(spec, grid);
  if (name == "div") return reference_from_derivative(spec, grid, DerivativeKind::div);
  if (Dim == 2 && name == "div_perp") return reference_from_derivative(spec, grid, DerivativeKind::div_perp);
  if (Dim == 3 && name == "curl") return reference_from_derivative(spec, grid, DerivativeKind::curl);
  if (Dim == 3 && name == "neg_curl") return reference_from_derivative(spec, grid, DerivativeKind::curl, -1.0);
  throw Error(ErrorKind::config, "unknown or inapplicable reference '" + name + "'");
}

inline ParameterSnapshot snapshot_of(const RunConfig& c, std::uint64_t seed) {
  return {c.L, c.Lambda, c.delta, c.noise, seed};
}

/// e_F, interior sup error and threshold mask for one field.
template <int Dim>
MetricsReport evaluate_field(const IndicatorField<Dim>& field, const SourceSpec<Dim>& spec, const RunConfig& c,
                             std::uint64_t seed) {
  const auto ref = reference_for(spec, field.kind, field.grid, c.reference);
  const ErrorOptions opts{c.real_part_only};
  RegionFilter<Dim> region;
  if (c.exclude_band > 0.0) region = {spec.support, c.exclude_band};
  const auto err = relative_l2_error(field, ref, opts, region);
  MetricsReport r;
  r.e_F = err.total;
  r.e_F_components = err.per_component;
  r.real_part_only = c.real_part_only;
  r.exclude_band = c.exclude_band;
  r.params = snapshot_of(c, seed);
  try {
    r.sup_error_interior = region_restricted_sup(field, ref, spec.support, c.exclude_band, opts);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::empty_region) throw;
  }
  if (c.threshold > 0.0) {
    const auto mask = threshold_diff(field, ref, c.threshold, opts);
    r.threshold_mask_fraction = mask_fraction<Dim>(mask, field.grid, field.arity,
                                                   [&](const Vec<Dim>& z) { return spec.support.contains(z); });
  }
  return r;
}

/// Full pipeline for one configuration: clean data once, then one noisy
/// realization per seed (seed, seed + 1, ...), the first configured
/// indicator on the first grid, and the seed-mean report.
template <int Dim>
MetricsReport run_replicates(const RunConfig& c, int seeds) {
  require(!c.indicators.empty(), "no indicator configured", ErrorKind::config);
  const auto spec = source_for<Dim>(c);
  const auto clean = simulate_clean<Dim>(c);
  const auto grid = grids_for<Dim>(c).front();
  std::vector<MetricsReport> runs;
  for (int s = 0; s < seeds; ++s) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(s);
    const auto field = reconstruct(apply_noise(clean, c.noise, seed), c.indicators.front(), grid, c);
    runs.push_back(evaluate_field(field, spec, c, seed));
  }
  auto out = aggregate_replicates(runs);
  out.params.seed = c.seed;
  return out;
}

inline MetricsReport run_replicates(const RunConfig& c, int seeds) {
  return c.dimension() == 2 ? run_replicates<2>(c, seeds) : run_replicates<3>(c, seeds);
}

/// Sets one sweep coordinate on a configuration. omega_max keeps delta and
/// changes the frequency count; delta_omega keeps omega_max.
inline void set_axis(RunConfig& c, TrendAxis axis, double value) {
  switch (axis) {
    case TrendAxis::L:
      c.L = static_cast<int>(std::lround(value));
      break;
    case TrendAxis::omega_max:
      c.Lambda = static_cast<int>(std::lround(value / c.delta));
      break;
    case TrendAxis::delta_omega: {
      const double w = c.Lambda * c.delta;
      c.delta = value;
      c.Lambda = static_cast<int>(std::lround(w / value));
      break;
    }
    case TrendAxis::delta:
      c.noise = value;
      break;
  }
  require(c.L >= 1 && c.Lambda >= 1 && c.delta > 0.0 && c.noise >= 0.0,
          std::string("sweep value out of range on axis ") + to_string(axis), ErrorKind::config);
}

}  // namespace qsm
