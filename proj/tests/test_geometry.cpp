#include <cmath>

#include <gtest/gtest.h>

#include "qsm/geometry.hpp"

using namespace qsm;

TEST(ThetaCircle, QuarterTurns) {
  const auto s = theta_circle(4);
  ASSERT_EQ(s.size(), 4u);
  const Vec2 expect[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int l = 0; l < 4; ++l) EXPECT_LT((s[l] - expect[l]).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(s.weight, pi / 2);
}

TEST(ThetaCircle, SinglePoint) {
  const auto s = theta_circle(1);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], Vec2(1, 0));
  EXPECT_DOUBLE_EQ(s.weight, 2 * pi);
}

TEST(ThetaCircle, RejectsEmpty) {
  EXPECT_THROW(theta_circle(0), Error);
  try {
    theta_circle(-3);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_parameter);
  }
}

TEST(ThetaCircle, UnitNormsAndRotationSymmetry) {
  const int L = 51;
  const auto s = theta_circle(L);
  const double a = 2 * pi / L;
  Eigen::Matrix2d rot;
  rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  for (int l = 0; l < L; ++l) {
    EXPECT_NEAR(s[l].norm(), 1.0, 1e-12);
    EXPECT_LT((rot * s[l] - s[(l + 1) % L]).norm(), 1e-12);
    // adjacent angular gap
    EXPECT_NEAR(std::acos(std::clamp(s[l].dot(s[(l + 1) % L]), -1.0, 1.0)), a, 1e-7);
  }
  EXPECT_NEAR(s.weight * L, 2 * pi, 1e-12);
}

TEST(FibonacciSphere, TwoPoints) {
  const auto s = fibonacci_sphere(2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0].x(), -0.7374, 1e-3);
  EXPECT_NEAR(s[0].y(), -0.6755, 1e-3);
  EXPECT_NEAR(s[0].z(), 0.0, 1e-15);
  EXPECT_LT((s[1] - Vec3(0, 0, -1)).norm(), 1e-12);
}

TEST(FibonacciSphere, UnitNormsAndWeight) {
  for (int L : {1, 7, 151, 251}) {
    const auto s = fibonacci_sphere(L);
    ASSERT_EQ(static_cast<int>(s.size()), L);
    for (const auto& x : s.directions) EXPECT_NEAR(x.norm(), 1.0, 1e-12);
    EXPECT_NEAR(s.weight * L, 4 * pi, 1e-12);
  }
  EXPECT_THROW(fibonacci_sphere(0), Error);
}

TEST(FibonacciSphere, LatticeFormula) {
  const int L = 151;
  const auto s = fibonacci_sphere(L);
  const double g = (std::sqrt(5.0) - 1.0) * pi;
  for (int l = 1; l <= L; ++l) {
    const double x3 = 1.0 - 2.0 * l / L;
    const double r = std::sqrt(1 - x3 * x3);
    EXPECT_LT((s[l - 1] - Vec3(r * std::cos(g * l), r * std::sin(g * l), x3)).norm(), 1e-12);
  }
}

TEST(FrequencyGrid, Values) {
  const auto f = frequency_grid(0.5, 80);
  EXPECT_DOUBLE_EQ(f[1], 0.5);
  EXPECT_DOUBLE_EQ(f[2], 1.0);
  EXPECT_DOUBLE_EQ(f[80], 40.0);
  EXPECT_DOUBLE_EQ(f.max(), 40.0);

  const auto one = frequency_grid(1.0, 1);
  EXPECT_EQ(one.count, 1);
  EXPECT_DOUBLE_EQ(one[1], 1.0);

  const auto eighth = frequency_grid(0.125, 320);
  EXPECT_EQ(eighth.count, 320);
  EXPECT_DOUBLE_EQ(eighth.max(), 40.0);
}

TEST(FrequencyGrid, RejectsBadInput) {
  EXPECT_THROW(frequency_grid(0.0, 10), Error);
  EXPECT_THROW(frequency_grid(-0.5, 10), Error);
  EXPECT_THROW(frequency_grid(0.5, 0), Error);
  EXPECT_THROW(frequency_grid(std::nan(""), 3), Error);
}

TEST(SamplingGrid, DefaultRectangle) {
  const auto g = cartesian_grid<2>(Vec2(-3, -3), Vec2(3, 3), 0.01);
  EXPECT_EQ(g.count(0), 601);
  EXPECT_EQ(g.count(1), 601);
  EXPECT_EQ(g.size(), 601u * 601u);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.01 * 0.01);
}

TEST(SamplingGrid, CornerNodes) {
  const auto g = cartesian_grid<2>(Vec2(0, 0), Vec2(1, 1), 1.0);
  ASSERT_EQ(g.size(), 4u);
  // last axis fastest
  EXPECT_EQ(g.node(0), Vec2(0, 0));
  EXPECT_EQ(g.node(1), Vec2(0, 1));
  EXPECT_EQ(g.node(2), Vec2(1, 0));
  EXPECT_EQ(g.node(3), Vec2(1, 1));
}

TEST(SamplingGrid, Slice) {
  const auto g = plane_slice(Vec3(-1, -1, -1), Vec3(1, 1, 1), 2, 0.25, 0.01);
  EXPECT_EQ(g.size(), 201u * 201u);
  ASSERT_EQ(g.free_axes().size(), 2u);
  for (std::size_t n : {std::size_t{0}, std::size_t{777}, g.size() - 1}) {
    const auto z = g.node(n);
    EXPECT_DOUBLE_EQ(z.z(), 0.25);
    EXPECT_TRUE((z.array() >= -1).all() && (z.array() <= 1).all());
  }
  EXPECT_EQ(g.node(1), Vec3(-1, -0.99, 0.25));
}

TEST(SamplingGrid, NodesStayInBounds) {
  const auto g = cartesian_grid<3>(Vec3(-0.5, 0, 1), Vec3(0.5, 0.3, 1.7), 0.1);
  EXPECT_EQ(g.size(), 11u * 4u * 8u);
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto z = g.node(n);
    EXPECT_TRUE((z.array() >= g.lo().array() - 1e-12).all() && (z.array() <= g.hi().array() + 1e-12).all());
  }
}

TEST(SamplingGrid, DeterministicEnumeration) {
  const auto a = cartesian_grid<2>(Vec2(-1, -2), Vec2(1, 2), 0.05);
  const auto b = cartesian_grid<2>(Vec2(-1, -2), Vec2(1, 2), 0.05);
  ASSERT_TRUE(a == b);
  for (std::size_t n = 0; n < a.size(); ++n) ASSERT_EQ(a.node(n), b.node(n));
}

TEST(SamplingGrid, RejectsBadInput) {
  EXPECT_THROW(cartesian_grid<2>(Vec2(0, 0), Vec2(0, 1), 0.1), Error);
  EXPECT_THROW(cartesian_grid<2>(Vec2(0, 0), Vec2(1, 1), 0.0), Error);
  EXPECT_THROW(plane_slice(Vec3(-1, -1, -1), Vec3(1, 1, 1), 2, 1.5, 0.1), Error);
  EXPECT_THROW(plane_slice(Vec3(-1, -1, -1), Vec3(1, 1, 1), 3, 0.0, 0.1), Error);
}
