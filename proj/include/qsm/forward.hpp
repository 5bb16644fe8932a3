#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qsm/common.hpp"
#include "qsm/geometry.hpp"
#include "qsm/parallel.hpp"
#include "qsm/quadrature.hpp"
#include "qsm/sources.hpp"

namespace qsm {

/// Homogeneous background: isotropic elastic medium (density 1) or a
/// dielectric with permittivity epsilon and permeability mu.
class PhysicsParams {
 public:
  enum class Kind { elastic, em };

  static PhysicsParams elastic(double lambda, double mu) {
    require(mu > 0.0 && 2.0 * mu + lambda > 0.0, "elastic: need mu > 0 and 2mu + lambda > 0");
    PhysicsParams p;
    p.kind_ = Kind::elastic;
    p.lambda_ = lambda;
    p.mu_ = mu;
    return p;
  }

  static PhysicsParams em(double epsilon, double mu) {
    require(epsilon > 0.0 && mu > 0.0, "em: need epsilon > 0 and mu > 0");
    PhysicsParams p;
    p.kind_ = Kind::em;
    p.epsilon_ = epsilon;
    p.mu_ = mu;
    return p;
  }

  Kind kind() const { return kind_; }
  bool is_elastic() const { return kind_ == Kind::elastic; }
  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  double epsilon() const { return epsilon_; }

  /// lambda + 2 mu
  double p_modulus() const { return lambda_ + 2.0 * mu_; }
  double k_p(double omega) const { return omega / std::sqrt(p_modulus()); }
  double k_s(double omega) const { return omega / std::sqrt(mu_); }
  double k(double omega) const { return omega * std::sqrt(mu_ * epsilon_); }
  double omega_from_k(double k) const { return k / std::sqrt(mu_ * epsilon_); }

  bool operator==(const PhysicsParams&) const = default;

 private:
  Kind kind_ = Kind::elastic;
  double lambda_ = 1.0;
  double mu_ = 1.0;
  double epsilon_ = 1.0;
};

/// Dense far-field data on a (direction, frequency) product set.
///
/// Each record (l, m) carries two Dim-vector blocks: t = 0 is u_p (elastic)
/// or E (em), t = 1 is u_s or H. For elastic sets `frequencies` holds the
/// circular frequencies omega_m; for em sets it holds the wavenumbers k_m.
template <int Dim>
struct FarFieldDataset {
  PhysicsParams physics;
  DirectionSet<Dim> directions;
  FrequencyGrid frequencies;
  std::vector<complex> values;
  double noise_level = 0.0;
  std::uint64_t seed = 0;
  std::string source_label;

  static constexpr int kBlocks = 2;

  std::size_t direction_count() const { return directions.size(); }
  std::size_t frequency_count() const { return static_cast<std::size_t>(frequencies.count); }
  std::size_t record_count() const { return direction_count() * frequency_count(); }

  /// m is 0-based here; the frequency is (m + 1) * delta.
  std::size_t offset(std::size_t l, std::size_t m, int t) const {
    return ((l * frequency_count() + m) * kBlocks + t) * Dim;
  }

  CVec<Dim> block(std::size_t l, std::size_t m, int t) const {
    return Eigen::Map<const CVec<Dim>>(values.data() + offset(l, m, t));
  }
  void set_block(std::size_t l, std::size_t m, int t, const CVec<Dim>& v) {
    Eigen::Map<CVec<Dim>>(values.data() + offset(l, m, t)) = v;
  }

  std::string problem() const {
    if (physics.is_elastic()) return Dim == 2 ? "elastic2d" : "elastic3d";
    return "em3d";
  }
};

namespace detail {

/// out[(l * count + m) * C + c] = sum_n values(n, c) exp(-i (m+1) delta xhat_l . y_n)
///
/// The phase is advanced by one multiplication per frequency step; this
/// matches direct exponentiation to ~count * 1e-16.
template <int Dim>
std::vector<complex> plane_wave_transforms(const std::vector<Vec<Dim>>& nodes, const Eigen::MatrixXcd& values,
                                           const DirectionSet<Dim>& dirs, double delta, int count) {
  const std::size_t L = dirs.size();
  const Eigen::Index C = values.cols();
  std::vector<complex> out(L * count * C);
  parallel_for(L, [&](std::size_t l) {
    std::vector<complex> acc(count * C, complex{});
    const Vec<Dim>& xhat = dirs[l];
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const complex step = std::exp(complex(0.0, -delta * xhat.dot(nodes[n])));
      complex phase = step;
      for (int m = 0; m < count; ++m) {
        for (Eigen::Index c = 0; c < C; ++c) acc[m * C + c] += values(n, c) * phase;
        phase *= step;
      }
    }
    std::copy(acc.begin(), acc.end(), out.begin() + l * count * C);
  });
  return out;
}

template <int Dim>
Eigen::MatrixXcd weighted_samples(const SourceSpec<Dim>& spec, const QuadratureRule<Dim>& rule) {
  Eigen::MatrixXcd v(rule.size(), Dim);
  for (std::size_t n = 0; n < rule.size(); ++n) v.row(n) = rule.weights[n] * eval_source(spec, rule.nodes[n]).transpose();
  return v;
}

template <int Dim>
CVec<Dim> transform_with_rule(const SourceSpec<Dim>& spec, const QuadratureRule<Dim>& rule, const Vec<Dim>& xi) {
  CVec<Dim> acc = CVec<Dim>::Zero();
  for (std::size_t n = 0; n < rule.size(); ++n) {
    acc += (rule.weights[n] * std::exp(complex(0.0, -xi.dot(rule.nodes[n])))) * eval_source(spec, rule.nodes[n]);
  }
  return acc;
}

// u_p = xhat (F . xhat), u_s = F - xhat (F . xhat) from transforms at k_p, k_s.
// In 2D the s-part equals xhat_perp (F . xhat_perp).
template <int Dim>
std::pair<CVec<Dim>, CVec<Dim>> split_elastic(const Vec<Dim>& xhat, const CVec<Dim>& fp, const CVec<Dim>& fs) {
  const CVec<Dim> x = xhat.template cast<complex>();
  const CVec<Dim> up = x * x.dot(fp);
  CVec<Dim> us;
  if constexpr (Dim == 2) {
    const CVec2 xp = perp(xhat).template cast<complex>();
    us = xp * xp.dot(fs);
  } else {
    us = fs - x * x.dot(fs);
  }
  return {up, us};
}

inline std::pair<CVec3, CVec3> em_from_transform(const PhysicsParams& params, const Vec3& xhat, double k,
                                                 const CVec3& f) {
  const CVec3 x = xhat.cast<complex>();
  const CVec3 tangential = f - x * x.dot(f);  // xhat x (F x xhat)
  const CVec3 e = (I * k / (4.0 * pi * std::sqrt(params.epsilon()))) * tangential;
  const CVec3 h = std::sqrt(params.epsilon() / params.mu()) * cross(x, e);
  return {e, h};
}

}  // namespace detail

/// Fourier transform F[S](xi) = int S(y) exp(-i xi.y) dy. By default the
/// shape-fitted rule at twice the node density of data synthesis and sized
/// for |xi| itself, so its node set differs from the forward one.
template <int Dim>
CVec<Dim> fourier_transform(const SourceSpec<Dim>& spec, const Vec<Dim>& xi,
                            QuadratureKind kind = QuadratureKind::adapted, double refine = 2.0) {
  const auto rule = make_rule(spec.support, xi.norm(), kind, refine);
  return detail::transform_with_rule(spec, rule, xi);
}

/// Scalar transform of rho(., omega) over `support`.
inline complex scalar_fourier_transform(const SupportShape<3>& support,
                                        const std::function<complex(const Vec3&, double)>& density, double omega,
                                        const Vec3& xi, QuadratureKind kind = QuadratureKind::adapted,
                                        double refine = 1.0) {
  const auto rule = make_rule(support, xi.norm(), kind, refine);
  complex acc{};
  for (std::size_t n = 0; n < rule.size(); ++n) {
    acc += rule.weights[n] * std::exp(complex(0.0, -xi.dot(rule.nodes[n]))) * density(rule.nodes[n], omega);
  }
  return acc;
}

inline std::pair<CVec2, CVec2> elastic_far_field_2d(const SourceSpec2& spec, const PhysicsParams& params,
                                                    const Vec2& xhat, double omega,
                                                    QuadratureKind kind = QuadratureKind::adapted) {
  require(params.is_elastic(), "elastic_far_field_2d: needs elastic parameters", ErrorKind::dimension_mismatch);
  require(omega > 0.0, "elastic_far_field_2d: omega must be > 0");
  const double kp = params.k_p(omega), ks = params.k_s(omega);
  const auto rule = make_rule(spec.support, ks, kind);
  return detail::split_elastic<2>(xhat, detail::transform_with_rule(spec, rule, Vec2(kp * xhat)),
                                  detail::transform_with_rule(spec, rule, Vec2(ks * xhat)));
}

inline std::pair<CVec3, CVec3> elastic_far_field_3d(const SourceSpec3& spec, const PhysicsParams& params,
                                                    const Vec3& xhat, double omega,
                                                    QuadratureKind kind = QuadratureKind::adapted) {
  require(params.is_elastic(), "elastic_far_field_3d: needs elastic parameters", ErrorKind::dimension_mismatch);
  require(omega > 0.0, "elastic_far_field_3d: omega must be > 0");
  const double kp = params.k_p(omega), ks = params.k_s(omega);
  const auto rule = make_rule(spec.support, ks, kind);
  return detail::split_elastic<3>(xhat, detail::transform_with_rule(spec, rule, Vec3(kp * xhat)),
                                  detail::transform_with_rule(spec, rule, Vec3(ks * xhat)));
}

/// Electric and magnetic far-field patterns at wavenumber k.
inline std::pair<CVec3, CVec3> em_far_fields(const SourceSpec3& spec, const PhysicsParams& params, const Vec3& xhat,
                                             double k, QuadratureKind kind = QuadratureKind::adapted) {
  require(!params.is_elastic(), "em_far_fields: needs electromagnetic parameters", ErrorKind::dimension_mismatch);
  require(k > 0.0, "em_far_fields: k must be > 0");
  const auto rule = make_rule(spec.support, k, kind);
  return detail::em_from_transform(params, xhat, k, detail::transform_with_rule(spec, rule, Vec3(k * xhat)));
}

/// Noiseless far-field data for every (direction, frequency) pair. One
/// quadrature rule, sized for the largest wavenumber, serves all records.
template <int Dim>
FarFieldDataset<Dim> synthesize_dataset(const SourceSpec<Dim>& spec, const PhysicsParams& params,
                                        const DirectionSet<Dim>& dirs, const FrequencyGrid& freqs,
                                        QuadratureKind kind = QuadratureKind::adapted) {
  require(dirs.size() >= 1 && freqs.count >= 1, "synthesize_dataset: empty direction or frequency set");
  require(params.is_elastic() || Dim == 3, "synthesize_dataset: electromagnetic data is 3D only",
          ErrorKind::dimension_mismatch);

  FarFieldDataset<Dim> ds;
  ds.physics = params;
  ds.directions = dirs;
  ds.frequencies = freqs;
  ds.source_label = spec.label;
  ds.values.assign(dirs.size() * freqs.count * FarFieldDataset<Dim>::kBlocks * Dim, complex{});

  const std::size_t L = dirs.size();
  const int count = freqs.count;
  if (params.is_elastic()) {
    const auto rule = make_rule(spec.support, params.k_s(freqs.max()), kind);
    const auto samples = detail::weighted_samples(spec, rule);
    const auto fp = detail::plane_wave_transforms(rule.nodes, samples, dirs, params.k_p(freqs.delta), count);
    const auto fs = detail::plane_wave_transforms(rule.nodes, samples, dirs, params.k_s(freqs.delta), count);
    for (std::size_t l = 0; l < L; ++l)
      for (int m = 0; m < count; ++m) {
        const std::size_t o = (l * count + m) * Dim;
        const auto [up, us] = detail::split_elastic<Dim>(dirs[l], Eigen::Map<const CVec<Dim>>(fp.data() + o),
                                                         Eigen::Map<const CVec<Dim>>(fs.data() + o));
        ds.set_block(l, m, 0, up);
        ds.set_block(l, m, 1, us);
      }
  } else if constexpr (Dim == 3) {
    const auto rule = make_rule(spec.support, freqs.max(), kind);
    const auto samples = detail::weighted_samples(spec, rule);
    const auto f = detail::plane_wave_transforms(rule.nodes, samples, dirs, freqs.delta, count);
    for (std::size_t l = 0; l < L; ++l)
      for (int m = 0; m < count; ++m) {
        const std::size_t o = (l * count + m) * 3;
        const auto [e, h] = detail::em_from_transform(params, dirs[l], freqs[m + 1],
                                                      Eigen::Map<const CVec3>(f.data() + o));
        ds.set_block(l, m, 0, e);
        ds.set_block(l, m, 1, h);
      }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Noise

/// SplitMix64 finaliser.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Pair of independent standard normals keyed by (seed, l, m, t): the key is
/// folded through mix64 one field at a time, two uniforms in (0, 1) are drawn
/// from it and transformed by Box-Muller. Independent of evaluation order.
inline std::pair<double, double> keyed_normal_pair(std::uint64_t seed, std::uint64_t l, std::uint64_t m,
                                                   std::uint64_t t) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ l);
  h = mix64(h ^ m);
  h = mix64(h ^ t);
  constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(mix64(h ^ 1ULL) >> 11) + 0.5) * scale;
  const double u2 = (static_cast<double>(mix64(h ^ 2ULL) >> 11) + 0.5) * scale;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2)};
}

/// 1 + delta (N1 + i N2) for record (l, m), block t; m is the 1-based
/// frequency index.
inline complex noise_multiplier(double delta, std::uint64_t seed, std::size_t l, std::size_t m, int t) {
  const auto [n1, n2] = keyed_normal_pair(seed, l, m, static_cast<std::uint64_t>(t));
  return complex(1.0 + delta * n1, delta * n2);
}

/// Multiplies every record block by an independent complex factor
/// 1 + delta (N1 + i N2). Blocks p/s (elastic) and E/H (em) get separate
/// factors.
template <int Dim>
FarFieldDataset<Dim> apply_noise(const FarFieldDataset<Dim>& clean, double delta, std::uint64_t seed) {
  require(delta >= 0.0 && std::isfinite(delta), "apply_noise: delta must be >= 0");
  FarFieldDataset<Dim> out = clean;
  out.noise_level = delta;
  out.seed = seed;
  if (delta == 0.0) return out;
  for (std::size_t l = 0; l < clean.direction_count(); ++l)
    for (std::size_t m = 0; m < clean.frequency_count(); ++m)
      for (int t = 0; t < FarFieldDataset<Dim>::kBlocks; ++t) {
        // m + 1 keys the multiplier by the 1-based frequency index.
        out.set_block(l, m, t, noise_multiplier(delta, seed, l, m + 1, t) * clean.block(l, m, t));
      }
  return out;
}

}  // namespace qsm
