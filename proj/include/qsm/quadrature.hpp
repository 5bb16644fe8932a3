#pragma once

#include <array>
#include <cmath>
#include <tuple>
#include <cstddef>
#include <utility>
#include <vector>

#include "qsm/common.hpp"
#include "qsm/sources.hpp"

namespace qsm {

/// Gauss-Legendre nodes and weights on [a, b].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n, double a, double b) {
  require(n >= 1, "gauss_legendre: n must be >= 1");
  // Legendre P_n and its derivative at t by the three-term recurrence.
  auto legendre = [n](double t) {
    double p0 = 1.0, p1 = t;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (t * p1 - p0) / (t * t - 1.0)};
  };
  std::vector<double> x(n), w(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(t);
      const double dt = p / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    const double dp = legendre(t).second;
    x[i] = mid - half * t;
    x[n - 1 - i] = mid + half * t;
    w[i] = w[n - 1 - i] = half * 2.0 / ((1.0 - t * t) * dp * dp);
  }
  return {x, w};
}

template <int Dim>
struct QuadratureRule {
  std::vector<Vec<Dim>> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

enum class QuadratureKind {
  adapted,    // Gauss/trapezoid product rule fitted to the support shape
  trapezoid,  // composite trapezoid on the bounding box lattice
};

namespace detail {

// Interval length l at wavenumber k: enough Gauss points for the oscillation
// plus headroom for a moderate-degree polynomial source.
inline int gauss_points(double k, double length, double oversample) {
  return static_cast<int>(std::ceil(oversample * (0.5 * k * length + 16.0)));
}

// Periodic trapezoid on a circle of radius r.
inline int angular_points(double k, double radius, double oversample) {
  const double kr = k * radius;
  return static_cast<int>(std::ceil(oversample * (kr + 4.0 * std::cbrt(kr) + 16.0)));
}

template <int Dim>
void append_adapted(const SupportShape<Dim>& shape, double k, double oversample, QuadratureRule<Dim>& rule) {
  using Kind = typename SupportShape<Dim>::Kind;
  switch (shape.kind()) {
    case Kind::set_union:
      for (const auto& part : shape.parts()) append_adapted(part, k, oversample, rule);
      return;
    case Kind::box: {
      std::array<std::vector<double>, Dim> xs, ws;
      for (int a = 0; a < Dim; ++a) {
        const double len = shape.hi()[a] - shape.lo()[a];
        std::tie(xs[a], ws[a]) = gauss_legendre(gauss_points(k, len, oversample), shape.lo()[a], shape.hi()[a]);
      }
      if constexpr (Dim == 2) {
        for (std::size_t i = 0; i < xs[0].size(); ++i)
          for (std::size_t j = 0; j < xs[1].size(); ++j) {
            rule.nodes.emplace_back(xs[0][i], xs[1][j]);
            rule.weights.push_back(ws[0][i] * ws[1][j]);
          }
      } else {
        for (std::size_t i = 0; i < xs[0].size(); ++i)
          for (std::size_t j = 0; j < xs[1].size(); ++j)
            for (std::size_t l = 0; l < xs[2].size(); ++l) {
              rule.nodes.emplace_back(xs[0][i], xs[1][j], xs[2][l]);
              rule.weights.push_back(ws[0][i] * ws[1][j] * ws[2][l]);
            }
      }
      return;
    }
    case Kind::round: {
      const double r_in = shape.inner_radius(), r_out = shape.outer_radius();
      const auto [rs, wr] = gauss_legendre(gauss_points(k, r_out - r_in, oversample), r_in, r_out);
      const int n_phi = angular_points(k, r_out, oversample);
      const double w_phi = 2.0 * pi / n_phi;
      if constexpr (Dim == 2) {
        for (std::size_t i = 0; i < rs.size(); ++i)
          for (int j = 0; j < n_phi; ++j) {
            const double phi = w_phi * j;
            rule.nodes.push_back(shape.center() + rs[i] * Vec2(std::cos(phi), std::sin(phi)));
            rule.weights.push_back(wr[i] * rs[i] * w_phi);
          }
      } else {
        const auto [ts, wt] = gauss_legendre(gauss_points(k, pi * r_out, oversample), 0.0, pi);
        for (std::size_t i = 0; i < rs.size(); ++i)
          for (std::size_t t = 0; t < ts.size(); ++t) {
            const double st = std::sin(ts[t]), ct = std::cos(ts[t]);
            for (int j = 0; j < n_phi; ++j) {
              const double phi = w_phi * j;
              rule.nodes.push_back(shape.center() + rs[i] * Vec3(st * std::cos(phi), st * std::sin(phi), ct));
              rule.weights.push_back(wr[i] * rs[i] * rs[i] * wt[t] * st * w_phi);
            }
          }
      }
      return;
    }
  }
}

}  // namespace detail

/// Product rule fitted to the support: tensor Gauss-Legendre on boxes,
/// polar/spherical coordinates (radial and polar-angle Gauss, azimuthal
/// trapezoid) on round shapes. Node counts scale with k_max so that
/// integrands e^{-i k x.y} S(y) with |k| <= k_max are resolved.
template <int Dim>
QuadratureRule<Dim> adapted_rule(const SupportShape<Dim>& shape, double k_max, double oversample = 1.0) {
  require(k_max >= 0.0 && oversample > 0.0, "adapted_rule: bad resolution parameters");
  QuadratureRule<Dim> rule;
  detail::append_adapted(shape, k_max, oversample, rule);
  return rule;
}

/// Forward lattice spacing with at least 10 points per shortest wavelength.
inline double trapezoid_spacing(double k_max) { return pi / (5.0 * std::max(k_max, 1.0)); }

/// Composite trapezoid rule on the bounding box: lattice lo + (i + offset) h,
/// restricted to nodes inside the support. The default half-cell offset keeps
/// the lattice off any reconstruction grid anchored at lo + i h.
template <int Dim>
QuadratureRule<Dim> trapezoid_rule(const SupportShape<Dim>& shape, double h, double offset = 0.5) {
  require(h > 0.0, "trapezoid_rule: spacing must be > 0");
  auto [lo, hi] = shape.bounding_box();
  std::array<int, Dim> n{};
  for (int a = 0; a < Dim; ++a) n[a] = static_cast<int>(std::ceil((hi[a] - lo[a]) / h)) + 2;
  QuadratureRule<Dim> rule;
  const double w = std::pow(h, Dim);
  Vec<Dim> z;
  if constexpr (Dim == 2) {
    for (int i = 0; i < n[0]; ++i)
      for (int j = 0; j < n[1]; ++j) {
        z << lo[0] + (i + offset) * h - h, lo[1] + (j + offset) * h - h;
        if (shape.contains(z)) rule.nodes.push_back(z), rule.weights.push_back(w);
      }
  } else {
    for (int i = 0; i < n[0]; ++i)
      for (int j = 0; j < n[1]; ++j)
        for (int l = 0; l < n[2]; ++l) {
          z << lo[0] + (i + offset) * h - h, lo[1] + (j + offset) * h - h, lo[2] + (l + offset) * h - h;
          if (shape.contains(z)) rule.nodes.push_back(z), rule.weights.push_back(w);
        }
  }
  return rule;
}

template <int Dim>
QuadratureRule<Dim> make_rule(const SupportShape<Dim>& shape, double k_max, QuadratureKind kind,
                              double refine = 1.0) {
  if (kind == QuadratureKind::adapted) return adapted_rule(shape, k_max, refine);
  return trapezoid_rule(shape, trapezoid_spacing(k_max) / refine);
}

}  // namespace qsm
