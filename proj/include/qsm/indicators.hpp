#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qsm/common.hpp"
#include "qsm/forward.hpp"
#include "qsm/geometry.hpp"
#include "qsm/parallel.hpp"
#include "qsm/quadrature.hpp"
#include "qsm/sources.hpp"

namespace qsm {

enum class IndicatorKind { f2d, p2d, s2d, f3d, p3d, s3d, E, H, rho };

inline const char* to_string(IndicatorKind k) {
  switch (k) {
    case IndicatorKind::f2d: return "f2d";
    case IndicatorKind::p2d: return "p2d";
    case IndicatorKind::s2d: return "s2d";
    case IndicatorKind::f3d: return "f3d";
    case IndicatorKind::p3d: return "p3d";
    case IndicatorKind::s3d: return "s3d";
    case IndicatorKind::E: return "E";
    case IndicatorKind::H: return "H";
    case IndicatorKind::rho: return "rho";
  }
  return "?";
}

inline IndicatorKind indicator_kind_from_string(const std::string& s) {
  for (auto k : {IndicatorKind::f2d, IndicatorKind::p2d, IndicatorKind::s2d, IndicatorKind::f3d, IndicatorKind::p3d,
                 IndicatorKind::s3d, IndicatorKind::E, IndicatorKind::H, IndicatorKind::rho}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::config, "unknown indicator kind '" + s + "'");
}

/// Number of complex components per node.
inline int indicator_arity(IndicatorKind k) {
  switch (k) {
    case IndicatorKind::f2d: return 2;
    case IndicatorKind::p2d:
    case IndicatorKind::s2d:
    case IndicatorKind::p3d: return 1;
    default: return 3;
  }
}

inline int indicator_dimension(IndicatorKind k) {
  switch (k) {
    case IndicatorKind::f2d:
    case IndicatorKind::p2d:
    case IndicatorKind::s2d: return 2;
    default: return 3;
  }
}

inline bool indicator_needs_em(IndicatorKind k) {
  return k == IndicatorKind::E || k == IndicatorKind::H || k == IndicatorKind::rho;
}

/// Complex indicator values on a sampling grid, node-major:
/// values[node * arity + component].
template <int Dim>
struct IndicatorField {
  SamplingGrid<Dim> grid;
  IndicatorKind kind = IndicatorKind::f2d;
  int arity = 1;
  std::vector<complex> values;
  std::map<std::string, std::string> provenance;

  std::size_t node_count() const { return grid.size(); }
  complex at(std::size_t node, int c) const { return values[node * arity + c]; }
};

/// Sum of plane waves coef_q exp(i kappa_q . z) with a vector of
/// coefficients per term.
template <int Dim>
struct PlaneWaveSum {
  std::vector<Vec<Dim>> wavevectors;
  Eigen::MatrixXcd coefficients;  // terms x components
};

struct EvaluationOptions {
  /// Required to evaluate 3D indicators on a full volume instead of a slice.
  bool allow_volume = false;
  /// Reference path: per node, terms accumulated one by one in term order.
  bool direct = false;
};

namespace detail {

// Terms per chunk and grid rows per task; both fixed so that the
// accumulation order is independent of the worker count.
inline constexpr Eigen::Index kTermChunk = 1024;
inline constexpr Eigen::Index kRowBlock = 64;

/// Evaluates the sum on a lattice with two free axes u (rows) and v
/// (columns). exp(i kappa.z) = exp(i kappa_fixed o) exp(i kappa_u x_i)
/// exp(i kappa_v y_j), so each chunk of terms is one complex matrix product
/// per component.
template <int Dim>
void evaluate_plane(const PlaneWaveSum<Dim>& sum, const std::vector<double>& xu, const std::vector<double>& yv,
                    int axis_u, int axis_v, const Vec<Dim>& fixed_point, std::vector<complex>& out,
                    std::size_t out_offset) {
  const Eigen::Index K = static_cast<Eigen::Index>(sum.wavevectors.size());
  const Eigen::Index C = sum.coefficients.cols();
  const Eigen::Index Nu = static_cast<Eigen::Index>(xu.size());
  const Eigen::Index Nv = static_cast<Eigen::Index>(yv.size());

  using RowMat = Eigen::Matrix<complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<RowMat> acc(C, RowMat::Zero(Nu, Nv));
  const Eigen::Index blocks = (Nu + kRowBlock - 1) / kRowBlock;

  for (Eigen::Index k0 = 0; k0 < K; k0 += kTermChunk) {
    const Eigen::Index kc = std::min(kTermChunk, K - k0);
    Eigen::MatrixXcd phase_v(Nv, kc);
    Eigen::MatrixXcd scaled(kc, C);
    for (Eigen::Index q = 0; q < kc; ++q) {
      const Vec<Dim>& kap = sum.wavevectors[k0 + q];
      for (Eigen::Index j = 0; j < Nv; ++j) phase_v(j, q) = std::exp(complex(0.0, kap[axis_v] * yv[j]));
      double fixed = 0.0;
      for (int a = 0; a < Dim; ++a)
        if (a != axis_u && a != axis_v) fixed += kap[a] * fixed_point[a];
      scaled.row(q) = sum.coefficients.row(k0 + q) * std::exp(complex(0.0, fixed));
    }
    // Column factors with the coefficients folded in, one per component.
    std::vector<Eigen::MatrixXcd> right(C);
    for (Eigen::Index c = 0; c < C; ++c) right[c] = (phase_v * scaled.col(c).asDiagonal()).transpose();
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b) * kRowBlock;
      const Eigen::Index rn = std::min(kRowBlock, Nu - r0);
      Eigen::MatrixXcd phase_u(rn, kc);
      for (Eigen::Index q = 0; q < kc; ++q) {
        const double ku = sum.wavevectors[k0 + q][axis_u];
        for (Eigen::Index i = 0; i < rn; ++i) phase_u(i, q) = std::exp(complex(0.0, ku * xu[r0 + i]));
      }
      for (Eigen::Index c = 0; c < C; ++c) acc[c].middleRows(r0, rn).noalias() += phase_u * right[c];
    });
  }
  for (Eigen::Index i = 0; i < Nu; ++i)
    for (Eigen::Index j = 0; j < Nv; ++j)
      for (Eigen::Index c = 0; c < C; ++c) out[out_offset + (i * Nv + j) * C + c] = acc[c](i, j);
}

template <int Dim>
std::vector<complex> evaluate_direct(const PlaneWaveSum<Dim>& sum, const SamplingGrid<Dim>& grid) {
  const Eigen::Index C = sum.coefficients.cols();
  std::vector<complex> out(grid.size() * C);
  parallel_for(grid.size(), [&](std::size_t n) {
    const Vec<Dim> z = grid.node(n);
    for (std::size_t q = 0; q < sum.wavevectors.size(); ++q) {
      const complex e = std::exp(complex(0.0, sum.wavevectors[q].dot(z)));
      for (Eigen::Index c = 0; c < C; ++c) out[n * C + c] += sum.coefficients(q, c) * e;
    }
  });
  return out;
}

}  // namespace detail

/// Evaluates a plane-wave sum at every node of `grid`, returning node-major
/// values. Grids must have two free axes (a 2D rectangle or a 3D slice);
/// full 3D volumes are evaluated slice by slice when allowed.
template <int Dim>
std::vector<complex> evaluate_plane_wave_sum(const PlaneWaveSum<Dim>& sum, const SamplingGrid<Dim>& grid,
                                             const EvaluationOptions& opts = {}) {
  const auto& free = grid.free_axes();
  require(free.size() == 2 || opts.allow_volume,
          "indicator: full 3D volume evaluation needs the allow_volume override");
  if (opts.direct) return detail::evaluate_direct(sum, grid);

  const Eigen::Index C = sum.coefficients.cols();
  std::vector<complex> out(grid.size() * C);
  if (free.size() == 2) {
    Vec<Dim> fixed = Vec<Dim>::Zero();
    if (grid.slice()) fixed[grid.slice()->axis] = grid.slice()->offset;
    detail::evaluate_plane(sum, grid.axis_points(free[0]), grid.axis_points(free[1]), free[0], free[1], fixed, out, 0);
    return out;
  }
  // Volume: planes x0 = const in node order.
  const auto x0 = grid.axis_points(0);
  const auto y1 = grid.axis_points(1);
  const auto y2 = grid.axis_points(2);
  const std::size_t plane = y1.size() * y2.size();
  for (std::size_t i = 0; i < x0.size(); ++i) {
    Vec<Dim> fixed = Vec<Dim>::Zero();
    fixed[0] = x0[i];
    detail::evaluate_plane(sum, y1, y2, 1, 2, fixed, out, i * plane * C);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete indicators
//
// All indicators replace the sphere integral by the equal-weight sum
// (weight = 2 pi / L or 4 pi / L) and the frequency integral by the right
// rectangle rule with step delta. For elastic data the shear part is mapped
// onto the common omega grid by omega -> (k_p / k_s) omega, which turns the
// p-part weights into the s-part weights with lambda + 2 mu replaced by mu.
//
//   I_f (n)  = w dw / (2 pi)^n  sum omega^(n-1) [u_p e^{i k_p x.z} / (l+2m)^(n/2)
//                                              + u_s e^{i k_s x.z} / m^(n/2)]
//   I_p (n)  = i w dw / (2 pi)^n sum omega^n (u_p . x) e^{i k_p x.z} / (l+2m)^((n+1)/2)
//   I_s (2D) = i w dw / (2 pi)^2 sum omega^2 (u_s . x_perp) e^{i k_s x.z} / m^(3/2)
//   I_s (3D) = i w dw / (2 pi)^3 sum omega^3 (u_s x x) e^{i k_s x.z} / m^2
//   I_E      = -i sqrt(eps) w dk / (2 pi^2) sum k E e^{i k x.z}
//   I_H      = sqrt(mu) w dk / (2 pi^2) sum k^2 H e^{i k x.z}
//   I_rho    = w dk / (2 pi)^3 sum k (x omega F[rho](k x) - 4 pi i sqrt(eps) E) e^{i k x.z}
//
// For n = 2 and w = 2 pi / L, I_f reduces to dw / (2 pi L) sum omega [...].

namespace detail {

template <int Dim>
void require_elastic(const FarFieldDataset<Dim>& ds, const char* who) {
  require(ds.physics.is_elastic(), std::string(who) + ": needs an elastic dataset", ErrorKind::dimension_mismatch);
}

inline void require_em(const FarFieldDataset<3>& ds, const char* who) {
  require(!ds.physics.is_elastic(), std::string(who) + ": needs an electromagnetic dataset",
          ErrorKind::dimension_mismatch);
}

template <int Dim>
std::map<std::string, std::string> provenance_of(const FarFieldDataset<Dim>& ds) {
  return {{"problem", ds.problem()},
          {"source", ds.source_label},
          {"L", std::to_string(ds.direction_count())},
          {"Lambda", std::to_string(ds.frequency_count())},
          {"delta_freq", format_number(ds.frequencies.delta)},
          {"noise", format_number(ds.noise_level)},
          {"seed", std::to_string(ds.seed)}};
}

template <int Dim>
IndicatorField<Dim> finish(const FarFieldDataset<Dim>& ds, const SamplingGrid<Dim>& grid, IndicatorKind kind,
                           const PlaneWaveSum<Dim>& sum, const EvaluationOptions& opts) {
  IndicatorField<Dim> field{grid, kind, indicator_arity(kind), {}, provenance_of(ds)};
  field.provenance["indicator"] = to_string(kind);
  field.values = evaluate_plane_wave_sum(sum, grid, opts);
  return field;
}

enum class ElasticPart { full, p_only, s_only };

// Terms ordered by direction (outer), frequency, then p before s.
template <int Dim>
PlaneWaveSum<Dim> elastic_terms(const FarFieldDataset<Dim>& ds, ElasticPart part, int arity) {
  const auto& ph = ds.physics;
  const double n = Dim;
  const double pre = ds.directions.weight * ds.frequencies.delta / std::pow(2.0 * pi, n);
  const std::size_t L = ds.direction_count(), M = ds.frequency_count();
  const int per = part == ElasticPart::full ? 2 : 1;
  PlaneWaveSum<Dim> sum;
  sum.wavevectors.reserve(L * M * per);
  sum.coefficients.resize(static_cast<Eigen::Index>(L * M * per), arity);
  Eigen::Index q = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const Vec<Dim>& x = ds.directions[l];
    for (std::size_t m = 0; m < M; ++m) {
      const double omega = ds.frequencies[static_cast<int>(m) + 1];
      const CVec<Dim> up = ds.block(l, m, 0), us = ds.block(l, m, 1);
      if (part == ElasticPart::full) {
        const double w = pre * std::pow(omega, n - 1.0);
        sum.wavevectors.push_back(ph.k_p(omega) * x);
        sum.coefficients.row(q++) = (w / std::pow(ph.p_modulus(), n / 2.0)) * up.transpose();
        sum.wavevectors.push_back(ph.k_s(omega) * x);
        sum.coefficients.row(q++) = (w / std::pow(ph.mu(), n / 2.0)) * us.transpose();
      } else if (part == ElasticPart::p_only) {
        const complex w = I * pre * std::pow(omega, n) / std::pow(ph.p_modulus(), (n + 1.0) / 2.0);
        sum.wavevectors.push_back(ph.k_p(omega) * x);
        sum.coefficients(q++, 0) = w * up.cwiseProduct(x.template cast<complex>()).sum();
      } else {
        const complex w = I * pre * std::pow(omega, n) / std::pow(ph.mu(), (n + 1.0) / 2.0);
        sum.wavevectors.push_back(ph.k_s(omega) * x);
        if constexpr (Dim == 2) {
          sum.coefficients(q++, 0) = w * us.cwiseProduct(perp(x).template cast<complex>()).sum();
        } else {
          sum.coefficients.row(q++) = w * cross(us, x.template cast<complex>()).transpose();
        }
      }
    }
  }
  return sum;
}

}  // namespace detail

inline IndicatorField<2> indicator_f_2d(const FarFieldDataset<2>& ds, const SamplingGrid<2>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_f_2d");
  return detail::finish(ds, grid, IndicatorKind::f2d, detail::elastic_terms(ds, detail::ElasticPart::full, 2), opts);
}

inline IndicatorField<2> indicator_p_2d(const FarFieldDataset<2>& ds, const SamplingGrid<2>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_p_2d");
  return detail::finish(ds, grid, IndicatorKind::p2d, detail::elastic_terms(ds, detail::ElasticPart::p_only, 1),
                        opts);
}

inline IndicatorField<2> indicator_s_2d(const FarFieldDataset<2>& ds, const SamplingGrid<2>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_s_2d");
  return detail::finish(ds, grid, IndicatorKind::s2d, detail::elastic_terms(ds, detail::ElasticPart::s_only, 1),
                        opts);
}

inline IndicatorField<3> indicator_f_3d(const FarFieldDataset<3>& ds, const SamplingGrid<3>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_f_3d");
  return detail::finish(ds, grid, IndicatorKind::f3d, detail::elastic_terms(ds, detail::ElasticPart::full, 3), opts);
}

inline IndicatorField<3> indicator_p_3d(const FarFieldDataset<3>& ds, const SamplingGrid<3>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_p_3d");
  return detail::finish(ds, grid, IndicatorKind::p3d, detail::elastic_terms(ds, detail::ElasticPart::p_only, 1),
                        opts);
}

/// Approximates -curl S.
inline IndicatorField<3> indicator_s_3d(const FarFieldDataset<3>& ds, const SamplingGrid<3>& grid,
                                        const EvaluationOptions& opts = {}) {
  detail::require_elastic(ds, "indicator_s_3d");
  return detail::finish(ds, grid, IndicatorKind::s3d, detail::elastic_terms(ds, detail::ElasticPart::s_only, 3),
                        opts);
}

namespace detail {
template <class Coef>
PlaneWaveSum<3> em_terms(const FarFieldDataset<3>& ds, Coef&& coef) {
  const std::size_t L = ds.direction_count(), M = ds.frequency_count();
  PlaneWaveSum<3> sum;
  sum.wavevectors.reserve(L * M);
  sum.coefficients.resize(static_cast<Eigen::Index>(L * M), 3);
  Eigen::Index q = 0;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t m = 0; m < M; ++m) {
      const double k = ds.frequencies[static_cast<int>(m) + 1];
      sum.wavevectors.push_back(k * ds.directions[l]);
      sum.coefficients.row(q++) = coef(l, m, k).transpose();
    }
  return sum;
}
}  // namespace detail

/// Recovers J for divergence-free sources.
inline IndicatorField<3> indicator_E(const FarFieldDataset<3>& ds, const SamplingGrid<3>& grid,
                                     const EvaluationOptions& opts = {}) {
  detail::require_em(ds, "indicator_E");
  const complex pre = -I * std::sqrt(ds.physics.epsilon()) * ds.directions.weight * ds.frequencies.delta / (2.0 * pi * pi);
  auto sum = detail::em_terms(ds, [&](std::size_t l, std::size_t m, double k) -> CVec3 {
    return (pre * k) * ds.block(l, m, 0);
  });
  return detail::finish(ds, grid, IndicatorKind::E, sum, opts);
}

/// Recovers curl J.
inline IndicatorField<3> indicator_H(const FarFieldDataset<3>& ds, const SamplingGrid<3>& grid,
                                     const EvaluationOptions& opts = {}) {
  detail::require_em(ds, "indicator_H");
  const double pre = std::sqrt(ds.physics.mu()) * ds.directions.weight * ds.frequencies.delta / (2.0 * pi * pi);
  auto sum = detail::em_terms(ds, [&](std::size_t l, std::size_t m, double k) -> CVec3 {
    return (pre * k * k) * ds.block(l, m, 1);
  });
  return detail::finish(ds, grid, IndicatorKind::H, sum, opts);
}

/// Known charge density rho(z, omega), compactly supported on `support`.
struct ChargeDensity {
  SupportShape<3> support;
  std::function<complex(const Vec3&, double)> density;
};

inline ChargeDensity charge_density_of(const SourceSpec3& spec) {
  require(static_cast<bool>(spec.charge_density), "indicator_rho: source '" + spec.label + "' has no charge density");
  return {spec.support, spec.charge_density};
}

/// Recovers J given the charge density. The transforms F[rho](k_m x_l) use
/// the adapted quadrature at the largest wavenumber of the dataset.
inline IndicatorField<3> indicator_rho(const FarFieldDataset<3>& ds, const ChargeDensity& rho,
                                       const SamplingGrid<3>& grid, const EvaluationOptions& opts = {}) {
  detail::require_em(ds, "indicator_rho");
  require(static_cast<bool>(rho.density), "indicator_rho: missing charge density");
  const auto& ph = ds.physics;
  const std::size_t L = ds.direction_count(), M = ds.frequency_count();

  // rho depends on omega, so samples are tabulated per frequency.
  const auto rule = adapted_rule(rho.support, ds.frequencies.max());
  Eigen::MatrixXcd samples(rule.size(), M);
  for (std::size_t n = 0; n < rule.size(); ++n)
    for (std::size_t m = 0; m < M; ++m)
      samples(n, m) = rule.weights[n] * rho.density(rule.nodes[n], ph.omega_from_k(ds.frequencies[static_cast<int>(m) + 1]));
  std::vector<complex> f_rho(L * M);
  parallel_for(L, [&](std::size_t l) {
    const Vec3& x = ds.directions[l];
    for (std::size_t n = 0; n < rule.size(); ++n) {
      const complex step = std::exp(complex(0.0, -ds.frequencies.delta * x.dot(rule.nodes[n])));
      complex phase = step;
      for (std::size_t m = 0; m < M; ++m) {
        f_rho[l * M + m] += samples(n, m) * phase;
        phase *= step;
      }
    }
  });

  const double pre = ds.directions.weight * ds.frequencies.delta / std::pow(2.0 * pi, 3);
  const complex e_scale = 4.0 * pi * I * std::sqrt(ph.epsilon());
  auto sum = detail::em_terms(ds, [&](std::size_t l, std::size_t m, double k) -> CVec3 {
    const CVec3 x = ds.directions[l].cast<complex>();
    const complex omega_f = ph.omega_from_k(k) * f_rho[l * M + m];
    return (pre * k) * (x * omega_f - e_scale * ds.block(l, m, 0));
  });
  return detail::finish(ds, grid, IndicatorKind::rho, sum, opts);
}

}  // namespace qsm
