#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace qsm {

using complex = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr complex I{0.0, 1.0};

template <int Dim>
using Vec = Eigen::Matrix<double, Dim, 1>;
template <int Dim>
using CVec = Eigen::Matrix<complex, Dim, 1>;

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;
using CVec2 = CVec<2>;
using CVec3 = CVec<3>;

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  invalid_parameter,
  dimension_mismatch,
  division_by_zero,
  empty_region,
  io,
  config,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what,
                    ErrorKind kind = ErrorKind::invalid_parameter) {
  if (!cond) throw Error(kind, what);
}

inline constexpr const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::dimension_mismatch: return "dimension-mismatch";
    case ErrorKind::division_by_zero: return "division-by-zero";
    case ErrorKind::empty_region: return "empty-region";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

// Shortest of %.15g/%.16g/%.17g that reads back to the same double.
inline std::string format_number(double v) {
  char buf[40];
  for (int digits : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v || std::isnan(v)) break;
  }
  return buf;
}

// 2D rotation by +pi/2.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }
inline CVec2 perp(const CVec2& v) { return {-v.y(), v.x()}; }

// Plain bilinear cross product. Eigen's cross conjugates complex results.
inline CVec3 cross(const CVec3& a, const CVec3& b) {
  return {a.y() * b.z() - a.z() * b.y(), a.z() * b.x() - a.x() * b.z(), a.x() * b.y() - a.y() * b.x()};
}

}  // namespace qsm
