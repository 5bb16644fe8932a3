#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qsm/common.hpp"

namespace qsm {

/// Closed support set of a source. Round shapes are disks/balls (r_in = 0)
/// or annuli/shells; unions are assumed to overlap only on sets of measure
/// zero so that quadrature over the pieces does not double count.
template <int Dim>
class SupportShape {
 public:
  enum class Kind { round, box, set_union };

  static SupportShape disk(const Vec<Dim>& center, double radius) {
    require(radius > 0.0, "disk: radius must be > 0");
    return round_shape(center, 0.0, radius);
  }
  static SupportShape ball(const Vec<Dim>& center, double radius) { return disk(center, radius); }

  static SupportShape annulus(const Vec<Dim>& center, double r_in, double r_out) {
    require(r_in >= 0.0 && r_out > r_in, "annulus: need 0 <= r_in < r_out");
    return round_shape(center, r_in, r_out);
  }

  static SupportShape box(const Vec<Dim>& lo, const Vec<Dim>& hi) {
    for (int a = 0; a < Dim; ++a) require(hi[a] > lo[a], "box: degenerate extent");
    SupportShape s;
    s.kind_ = Kind::box;
    s.lo_ = lo;
    s.hi_ = hi;
    return s;
  }

  static SupportShape set_union(std::vector<SupportShape> parts) {
    require(!parts.empty(), "union: needs at least one part");
    SupportShape s;
    s.kind_ = Kind::set_union;
    s.parts_ = std::move(parts);
    return s;
  }

  Kind kind() const { return kind_; }
  const Vec<Dim>& center() const { return center_; }
  double inner_radius() const { return r_in_; }
  double outer_radius() const { return r_out_; }
  const Vec<Dim>& lo() const { return lo_; }
  const Vec<Dim>& hi() const { return hi_; }
  const std::vector<SupportShape>& parts() const { return parts_; }

  std::string name() const {
    switch (kind_) {
      case Kind::round:
        if (r_in_ > 0.0) return "annulus";
        return Dim == 2 ? "disk" : "ball";
      case Kind::box: return "box";
      case Kind::set_union: return "union";
    }
    return "";
  }

  bool contains(const Vec<Dim>& z) const {
    switch (kind_) {
      case Kind::round: {
        const double r = (z - center_).norm();
        return r >= r_in_ && r <= r_out_;
      }
      case Kind::box:
        return (z.array() >= lo_.array()).all() && (z.array() <= hi_.array()).all();
      case Kind::set_union:
        return std::any_of(parts_.begin(), parts_.end(), [&](const auto& p) { return p.contains(z); });
    }
    return false;
  }

  std::pair<Vec<Dim>, Vec<Dim>> bounding_box() const {
    switch (kind_) {
      case Kind::round:
        return {center_.array() - r_out_, center_.array() + r_out_};
      case Kind::box:
        return {lo_, hi_};
      case Kind::set_union: {
        auto [lo, hi] = parts_.front().bounding_box();
        for (const auto& p : parts_) {
          auto [plo, phi] = p.bounding_box();
          lo = lo.cwiseMin(plo);
          hi = hi.cwiseMax(phi);
        }
        return {lo, hi};
      }
    }
    return {};
  }

  /// Euclidean distance from z to the boundary. For unions this is the
  /// distance to the nearest piece boundary, which over-approximates the
  /// true boundary where pieces touch.
  double boundary_distance(const Vec<Dim>& z) const {
    switch (kind_) {
      case Kind::round: {
        const double r = (z - center_).norm();
        double d = std::abs(r - r_out_);
        if (r_in_ > 0.0) d = std::min(d, std::abs(r - r_in_));
        return d;
      }
      case Kind::box: {
        if (contains(z)) {
          const double lo = (z - lo_).minCoeff();
          const double hi = (hi_ - z).minCoeff();
          return std::min(lo, hi);
        }
        const Vec<Dim> outside = (lo_ - z).cwiseMax(z - hi_).cwiseMax(Vec<Dim>::Zero());
        return outside.norm();
      }
      case Kind::set_union: {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& p : parts_) d = std::min(d, p.boundary_distance(z));
        return d;
      }
    }
    return 0.0;
  }

 private:
  static SupportShape round_shape(const Vec<Dim>& center, double r_in, double r_out) {
    SupportShape s;
    s.kind_ = Kind::round;
    s.center_ = center;
    s.r_in_ = r_in;
    s.r_out_ = r_out;
    return s;
  }

  Kind kind_ = Kind::box;
  Vec<Dim> center_ = Vec<Dim>::Zero();
  double r_in_ = 0.0;
  double r_out_ = 0.0;
  Vec<Dim> lo_ = Vec<Dim>::Zero();
  Vec<Dim> hi_ = Vec<Dim>::Zero();
  std::vector<SupportShape> parts_;
};

/// Compactly supported vector source with optional closed-form first
/// derivatives. `field` is only consulted inside `support`.
template <int Dim>
struct SourceSpec {
  using Point = Vec<Dim>;

  std::string label;
  SupportShape<Dim> support = SupportShape<Dim>::box(Point::Constant(-1), Point::Constant(1));
  std::function<CVec<Dim>(const Point&)> field;

  std::function<complex(const Point&)> div;
  std::function<complex(const Point&)> div_perp;  // 2D only
  std::function<CVec3(const Point&)> curl;        // 3D only

  /// Charge density rho(z, omega) = div J(z) / (i omega) for EM sources.
  std::function<complex(const Point&, double)> charge_density;

  /// True when the source has a nonzero trace on the boundary, so that its
  /// derivatives are distributional there.
  bool jumps_at_boundary = false;

  int components() const { return Dim; }
};

using SourceSpec2 = SourceSpec<2>;
using SourceSpec3 = SourceSpec<3>;

template <int Dim>
CVec<Dim> eval_source(const SourceSpec<Dim>& spec, const Vec<Dim>& z) {
  if (!spec.field || !spec.support.contains(z)) return CVec<Dim>::Zero();
  return spec.field(z);
}

/// Runtime-dimension entry point used by the CLI.
template <int Dim>
CVec<Dim> eval_source(const SourceSpec<Dim>& spec, const std::vector<double>& z) {
  require(static_cast<int>(z.size()) == Dim, "eval_source: point dimension does not match source",
          ErrorKind::invalid_parameter);
  return eval_source(spec, Vec<Dim>(Eigen::Map<const Vec<Dim>>(z.data())));
}

enum class DerivativeKind { div, div_perp, curl };

struct DerivativeValue {
  Eigen::VectorXcd value;  // 1 entry for div/div_perp, 3 for curl
  bool approximate = false;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

namespace detail {

template <int Dim>
Eigen::Matrix<complex, Dim, Dim> jacobian_fd(const SourceSpec<Dim>& spec, const Vec<Dim>& z, double step) {
  Eigen::Matrix<complex, Dim, Dim> jac;  // jac(i, j) = d S_i / d z_j
  for (int j = 0; j < Dim; ++j) {
    Vec<Dim> zp = z, zm = z;
    zp[j] += step;
    zm[j] -= step;
    jac.col(j) = (eval_source(spec, zp) - eval_source(spec, zm)) / (2.0 * step);
  }
  return jac;
}

}  // namespace detail

/// Analytic derivative when the source carries one, otherwise a second-order
/// central difference flagged as approximate.
template <int Dim>
DerivativeValue eval_derivative(const SourceSpec<Dim>& spec, const Vec<Dim>& z, DerivativeKind kind,
                                double fd_step = kFiniteDifferenceStep) {
  require(kind != DerivativeKind::div_perp || Dim == 2, "eval_derivative: div_perp needs a 2D source");
  require(kind != DerivativeKind::curl || Dim == 3, "eval_derivative: curl needs a 3D source");

  // Near a jump the analytic interior formula is meaningless; fall through
  // to the flagged finite difference.
  const bool on_jump = spec.jumps_at_boundary && spec.support.boundary_distance(z) <= fd_step;
  if (!on_jump) {
    const bool inside = spec.support.contains(z);
    DerivativeValue out;
    if (kind == DerivativeKind::div && spec.div) {
      out.value = Eigen::VectorXcd::Constant(1, inside ? spec.div(z) : complex{});
      return out;
    }
    if (kind == DerivativeKind::div_perp && spec.div_perp) {
      out.value = Eigen::VectorXcd::Constant(1, inside ? spec.div_perp(z) : complex{});
      return out;
    }
    if (kind == DerivativeKind::curl && spec.curl) {
      out.value = inside ? Eigen::VectorXcd(spec.curl(z)) : Eigen::VectorXcd(Eigen::VectorXcd::Zero(3));
      return out;
    }
  }

  DerivativeValue out;
  const auto jac = detail::jacobian_fd(spec, z, fd_step);
  out.approximate = true;
  if (kind == DerivativeKind::div) {
    out.value = Eigen::VectorXcd::Constant(1, jac.trace());
  } else if constexpr (Dim == 2) {
    out.value = Eigen::VectorXcd::Constant(1, -jac(0, 1) + jac(1, 0));
  } else if constexpr (Dim == 3) {
    out.value.resize(3);
    out.value << jac(2, 1) - jac(1, 2), jac(0, 2) - jac(2, 0), jac(1, 0) - jac(0, 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Builtin sources

namespace sources {

/// S = (|z| + 5, exp(0.1|z|^2) + 4) on the given support.
inline SourceSpec2 example_one(SupportShape<2> support = SupportShape<2>::disk(Vec2::Zero(), 1.5)) {
  SourceSpec2 s;
  s.label = "example_one";
  s.support = std::move(support);
  s.jumps_at_boundary = true;
  s.field = [](const Vec2& z) {
    return CVec2(z.norm() + 5.0, std::exp(0.1 * z.squaredNorm()) + 4.0);
  };
  // d|z|/dz is undefined at the origin; 0 is returned there.
  s.div = [](const Vec2& z) {
    const double r = z.norm();
    const double d1 = r > 0.0 ? z.x() / r : 0.0;
    return complex(d1 + 0.2 * z.y() * std::exp(0.1 * z.squaredNorm()));
  };
  s.div_perp = [](const Vec2& z) {
    const double r = z.norm();
    const double d2 = r > 0.0 ? z.y() / r : 0.0;
    return complex(-d2 + 0.2 * z.x() * std::exp(0.1 * z.squaredNorm()));
  };
  return s;
}

namespace detail {
inline const Vec2& ring_center(int i) {
  // z + (-1)^i (1,1) = z - c_i, i = 1, 2
  static const Vec2 c1(1.0, 1.0), c2(-1.0, -1.0);
  return i == 1 ? c1 : c2;
}
inline double ring_poly(double r2) { return 10.0 * r2 * r2 - 11.6 * r2 + 1.6; }
// Gradient of (10r^4 - 11.6r^2 + 1.6)^2 with x = z - c.
inline Vec2 ring_grad(const Vec2& x) {
  const double r2 = x.squaredNorm();
  return 2.0 * ring_poly(r2) * (40.0 * r2 - 23.2) * x;
}
}  // namespace detail

/// Two annular rings; component i lives on the ring centred at -(-1)^i (1,1).
inline SourceSpec2 example_two() {
  using detail::ring_center;
  SourceSpec2 s;
  s.label = "example_two";
  s.support = SupportShape<2>::set_union({SupportShape<2>::annulus(ring_center(1), 0.4, 1.0),
                                          SupportShape<2>::annulus(ring_center(2), 0.4, 1.0)});
  auto on_ring = [](const Vec2& z, int i) {
    const double r = (z - ring_center(i)).norm();
    return r >= 0.4 && r <= 1.0;
  };
  s.field = [on_ring](const Vec2& z) {
    CVec2 v = CVec2::Zero();
    for (int i = 1; i <= 2; ++i) {
      if (!on_ring(z, i)) continue;
      const double p = detail::ring_poly((z - ring_center(i)).squaredNorm());
      v[i - 1] = p * p;
    }
    return v;
  };
  s.div = [on_ring](const Vec2& z) {
    double d = 0.0;
    if (on_ring(z, 1)) d += detail::ring_grad(z - ring_center(1)).x();
    if (on_ring(z, 2)) d += detail::ring_grad(z - ring_center(2)).y();
    return complex(d);
  };
  s.div_perp = [on_ring](const Vec2& z) {
    double d = 0.0;
    if (on_ring(z, 1)) d -= detail::ring_grad(z - ring_center(1)).y();
    if (on_ring(z, 2)) d += detail::ring_grad(z - ring_center(2)).x();
    return complex(d);
  };
  return s;
}

/// J = (4,4,4) + curl(|z|^2, exp|z|^2, 1) on two boxes; divergence free in
/// the interior.
inline SourceSpec3 example_three() {
  SourceSpec3 s;
  s.label = "example_three";
  s.jumps_at_boundary = true;
  s.support = SupportShape<3>::set_union({SupportShape<3>::box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.0)),
                                          SupportShape<3>::box(Vec3(0.0, 0.0, 0.0), Vec3(0.5, 0.5, 0.5))});
  s.field = [](const Vec3& z) {
    const double e = std::exp(z.squaredNorm());
    return CVec3(4.0 - 2.0 * z.z() * e, 4.0 + 2.0 * z.z(), 4.0 + 2.0 * z.x() * e - 2.0 * z.y());
  };
  s.div = [](const Vec3&) { return complex{}; };
  s.curl = [](const Vec3& z) {
    // curl J = curl curl A = grad div A - lap A, A = (|z|^2, e^{|z|^2}, 1)
    const double e = std::exp(z.squaredNorm());
    const double r2 = z.squaredNorm();
    const Vec3 grad_div = Vec3(2.0, 0.0, 0.0) + e * Vec3(4.0 * z.x() * z.y(), 2.0 + 4.0 * z.y() * z.y(), 4.0 * z.y() * z.z());
    const Vec3 lap(6.0, e * (6.0 + 4.0 * r2), 0.0);
    return CVec3((grad_div - lap).cast<complex>());
  };
  s.charge_density = [](const Vec3&, double) { return complex{}; };
  return s;
}

/// J = (|z|^2 - 0.25)^2 (1,1,1) on the ball of radius 0.5.
inline SourceSpec3 example_four() {
  SourceSpec3 s;
  s.label = "example_four";
  s.support = SupportShape<3>::ball(Vec3::Zero(), 0.5);
  s.field = [](const Vec3& z) {
    const double q = z.squaredNorm() - 0.25;
    return CVec3::Constant(q * q);
  };
  s.div = [](const Vec3& z) { return complex(4.0 * (z.squaredNorm() - 0.25) * z.sum()); };
  s.curl = [](const Vec3& z) {
    const double q = 4.0 * (z.squaredNorm() - 0.25);
    return CVec3(q * (z.y() - z.z()), q * (z.z() - z.x()), q * (z.x() - z.y()));
  };
  s.charge_density = [](const Vec3& z, double omega) {
    return complex(4.0 * (z.squaredNorm() - 0.25) * z.sum()) / (I * omega);
  };
  return s;
}

/// Constant vector on a shape; all first derivatives vanish in the interior.
template <int Dim>
SourceSpec<Dim> constant_on(SupportShape<Dim> support, const CVec<Dim>& value) {
  SourceSpec<Dim> s;
  s.label = "constant_" + support.name();
  s.jumps_at_boundary = true;
  s.support = std::move(support);
  s.field = [value](const Vec<Dim>&) { return value; };
  s.div = [](const Vec<Dim>&) { return complex{}; };
  if constexpr (Dim == 2) s.div_perp = [](const Vec2&) { return complex{}; };
  if constexpr (Dim == 3) s.curl = [](const Vec3&) { return CVec3::Zero().eval(); };
  s.charge_density = [](const Vec<Dim>&, double) { return complex{}; };
  return s;
}

namespace detail {
// Polynomial bump b(z) = (1 - |z-c|^2/R^2)^p on |z-c| <= R, C^(p-1) across
// the boundary.
// s = 1 - r^2/R^2; returns (b, grad b, lap b) with x = z - c in Dim dimensions.
template <int Dim>
struct BumpEval {
  double value;
  Vec<Dim> grad;
  double lap;
  double s;
};
template <int Dim>
BumpEval<Dim> bump_eval(const Vec<Dim>& x, double radius, int p) {
  const double inv = 1.0 / (radius * radius);
  const double s = std::max(0.0, 1.0 - x.squaredNorm() * inv);
  const double sp1 = p >= 1 ? std::pow(s, p - 1) : 0.0;
  const double sp2 = p >= 2 ? std::pow(s, p - 2) : 0.0;
  BumpEval<Dim> e;
  e.s = s;
  e.value = std::pow(s, p);
  e.grad = -2.0 * p * inv * sp1 * x;
  e.lap = 4.0 * p * (p - 1) * inv * inv * sp2 * x.squaredNorm() - 2.0 * p * Dim * inv * sp1;
  return e;
}
}  // namespace detail

/// S = b(z) v for a constant vector v.
template <int Dim>
SourceSpec<Dim> bump_source(const Vec<Dim>& center, double radius, const Vec<Dim>& direction, int power = 4) {
  require(radius > 0.0 && power >= 2, "bump_source: need radius > 0 and power >= 2");
  SourceSpec<Dim> s;
  s.label = "bump";
  s.support = SupportShape<Dim>::ball(center, radius);
  s.field = [=](const Vec<Dim>& z) {
    return CVec<Dim>((detail::bump_eval<Dim>(z - center, radius, power).value * direction).template cast<complex>());
  };
  s.div = [=](const Vec<Dim>& z) {
    return complex(detail::bump_eval<Dim>(z - center, radius, power).grad.dot(direction));
  };
  if constexpr (Dim == 2) {
    s.div_perp = [=](const Vec2& z) {
      const Vec2 g = detail::bump_eval<2>(z - center, radius, power).grad;
      return complex(-g.y() * direction.x() + g.x() * direction.y());
    };
  } else {
    s.curl = [=](const Vec3& z) {
      const Vec3 g = detail::bump_eval<3>(z - center, radius, power).grad;
      return CVec3(g.cross(direction).template cast<complex>());
    };
    s.charge_density = [=](const Vec3& z, double omega) {
      return complex(detail::bump_eval<3>(z - center, radius, power).grad.dot(direction)) / (I * omega);
    };
  }
  return s;
}

/// Curl-free source S = grad b.
template <int Dim>
SourceSpec<Dim> gradient_bump(const Vec<Dim>& center, double radius, int power = 4) {
  require(radius > 0.0 && power >= 3, "gradient_bump: need radius > 0 and power >= 3");
  SourceSpec<Dim> s;
  s.label = "gradient_bump";
  s.support = SupportShape<Dim>::ball(center, radius);
  s.field = [=](const Vec<Dim>& z) {
    return CVec<Dim>(detail::bump_eval<Dim>(z - center, radius, power).grad.template cast<complex>());
  };
  s.div = [=](const Vec<Dim>& z) { return complex(detail::bump_eval<Dim>(z - center, radius, power).lap); };
  if constexpr (Dim == 2) {
    s.div_perp = [](const Vec2&) { return complex{}; };
  } else {
    s.curl = [](const Vec3&) { return CVec3::Zero().eval(); };
    s.charge_density = [=](const Vec3& z, double omega) {
      return complex(detail::bump_eval<3>(z - center, radius, power).lap) / (I * omega);
    };
  }
  return s;
}

/// Divergence-free source: grad_perp b in 2D, grad b x a in 3D (= curl(b a)).
template <int Dim>
SourceSpec<Dim> curl_bump(const Vec<Dim>& center, double radius, const Vec3& axis = Vec3(0, 0, 1), int power = 4) {
  require(radius > 0.0 && power >= 3, "curl_bump: need radius > 0 and power >= 3");
  SourceSpec<Dim> s;
  s.label = "curl_bump";
  s.support = SupportShape<Dim>::ball(center, radius);
  s.div = [](const Vec<Dim>&) { return complex{}; };
  if constexpr (Dim == 2) {
    s.field = [=](const Vec2& z) {
      return CVec2(perp(detail::bump_eval<2>(z - center, radius, power).grad).template cast<complex>());
    };
    s.div_perp = [=](const Vec2& z) { return complex(detail::bump_eval<2>(z - center, radius, power).lap); };
  } else {
    s.field = [=](const Vec3& z) {
      return CVec3(detail::bump_eval<3>(z - center, radius, power).grad.cross(axis).template cast<complex>());
    };
    // curl curl (b a) = grad(a . grad b) - a lap b
    s.curl = [=](const Vec3& z) {
      const Vec3 x = z - center;
      const double inv = 1.0 / (radius * radius);
      const auto e = detail::bump_eval<3>(x, radius, power);
      const double sp2 = std::pow(e.s, power - 2);
      const double sp1 = std::pow(e.s, power - 1);
      const Vec3 grad_adot = 4.0 * power * (power - 1) * inv * inv * sp2 * axis.dot(x) * x - 2.0 * power * inv * sp1 * axis;
      return CVec3((grad_adot - e.lap * axis).template cast<complex>());
    };
    s.charge_density = [](const Vec3&, double) { return complex{}; };
  }
  return s;
}

}  // namespace sources
}  // namespace qsm
