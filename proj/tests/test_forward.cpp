#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qsm/forward.hpp"

using namespace qsm;

namespace {

// Closed-form transforms of indicator functions.
double disk_transform(double k, double R) { return k == 0 ? pi * R * R : 2 * pi * R * std::cyl_bessel_j(1, k * R) / k; }
double ball_transform(double k, double R) {
  return k == 0 ? 4 * pi * R * R * R / 3 : 4 * pi * (std::sin(k * R) - k * R * std::cos(k * R)) / (k * k * k);
}

double rel(const auto& a, const auto& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST(Quadrature, GaussLegendreExactForPolynomials) {
  for (int n : {1, 4, 17, 60}) {
    const auto [x, w] = gauss_legendre(n, -0.3, 1.2);
    for (int d = 0; d <= 2 * n - 1; d += std::max(1, n / 3)) {
      double q = 0;
      for (int i = 0; i < n; ++i) q += w[i] * std::pow(x[i], d);
      const double exact = (std::pow(1.2, d + 1) - std::pow(-0.3, d + 1)) / (d + 1);
      EXPECT_NEAR(q, exact, 1e-13 * std::max(1.0, std::abs(exact))) << n << " " << d;
    }
  }
}

TEST(Quadrature, TrapezoidConvergesOnSmoothSource) {
  const auto s = sources::bump_source<2>(Vec2(0.1, 0.2), 0.9, Vec2(1, 0), 6);
  const Vec2 xi(3.0, -2.0);
  const auto exact = fourier_transform(s, xi, QuadratureKind::adapted, 3.0);
  const double h = trapezoid_spacing(xi.norm());
  const double e1 = rel(detail::transform_with_rule(s, trapezoid_rule(s.support, h), xi), exact);
  const double e2 = rel(detail::transform_with_rule(s, trapezoid_rule(s.support, h / 2), xi), exact);
  EXPECT_LT(e1, 1e-3);
  EXPECT_LT(e2, 0.25 * e1);  // at least second order
}

TEST(Physics, Wavenumbers) {
  const auto p = PhysicsParams::elastic(1, 1);
  EXPECT_DOUBLE_EQ(p.k_p(std::sqrt(3.0)), 1.0);
  EXPECT_DOUBLE_EQ(p.k_s(2.0), 2.0);
  EXPECT_GE(p.k_s(5.0), p.k_p(5.0));
  const auto em = PhysicsParams::em(4, 1);
  EXPECT_DOUBLE_EQ(em.k(1.0), 2.0);
  EXPECT_THROW(PhysicsParams::elastic(-3, 1), Error);
  EXPECT_THROW(PhysicsParams::elastic(1, 0), Error);
  EXPECT_THROW(PhysicsParams::em(0, 1), Error);
}

TEST(ElasticFarField2D, ZeroSource) {
  const auto s = sources::constant_on(SupportShape<2>::disk(Vec2::Zero(), 1.0), CVec2(CVec2::Zero()));
  const auto [up, us] = elastic_far_field_2d(s, PhysicsParams::elastic(1, 1), Vec2(0.6, 0.8), 3.0);
  EXPECT_EQ(up, CVec2::Zero());
  EXPECT_EQ(us, CVec2::Zero());
}

TEST(ElasticFarField2D, UnitDiskBessel) {
  const auto s = sources::constant_on(SupportShape<2>::disk(Vec2::Zero(), 1.0), CVec2(1.0, 0.0));
  const auto [up, us] = elastic_far_field_2d(s, PhysicsParams::elastic(1, 1), Vec2(1, 0), std::sqrt(3.0));
  EXPECT_NEAR(up[0].real(), 2 * pi * std::cyl_bessel_j(1, 1.0), 1e-10);
  EXPECT_NEAR(up[0].real(), 2.7650, 1e-4);
  EXPECT_NEAR(std::abs(up[0].imag()), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(up[1]), 0.0, 1e-12);
  EXPECT_NEAR(us.norm(), 0.0, 1e-12);  // S is parallel to xhat
}

TEST(ElasticFarField2D, ShiftedDiskClosedFormUpTo50) {
  const auto p = PhysicsParams::elastic(1, 1);
  const Vec2 c(0.3, -0.2);
  const double R = 1.5;
  const CVec2 S(2.0, -1.0);
  const auto s = sources::constant_on(SupportShape<2>::disk(c, R), S);
  for (double w : {0.5, 7.0, 23.0, 50.0})
    for (double th : {0.1, 1.3, 2.9, 4.4}) {
      const Vec2 x(std::cos(th), std::sin(th));
      const auto [up, us] = elastic_far_field_2d(s, p, x, w);
      auto F = [&](double k) { return disk_transform(k, R) * std::exp(complex(0, -k * x.dot(c))); };
      const CVec2 xc = x.cast<complex>(), xp = perp(x).cast<complex>();
      const CVec2 up_exact = xc * (F(p.k_p(w)) * (S(0) * x(0) + S(1) * x(1)));
      const CVec2 us_exact = xp * (F(p.k_s(w)) * (S(0) * xp(0) + S(1) * xp(1)));
      EXPECT_LT(rel(up, up_exact), 1e-6) << w;
      EXPECT_LT(rel(us, us_exact), 1e-6) << w;
    }
}

TEST(ElasticFarField2D, ErrorsOnBadInput) {
  const auto s = sources::example_two();
  EXPECT_THROW(elastic_far_field_2d(s, PhysicsParams::elastic(1, 1), Vec2(1, 0), 0.0), Error);
  try {
    elastic_far_field_2d(s, PhysicsParams::em(1, 1), Vec2(1, 0), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(ElasticFarField3D, BallClosedFormAndPolarization) {
  const auto p = PhysicsParams::elastic(2, 0.5);
  const double R = 0.5;
  const CVec3 S(1.0, -2.0, 0.5);
  const auto s = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), R), S);
  for (double w : {1.0, 12.0, 25.0}) {
    const Vec3 x = Vec3(0.3, -0.5, 0.8).normalized();
    const auto [up, us] = elastic_far_field_3d(s, p, x, w);
    const CVec3 xc = x.cast<complex>();
    const complex sx = S(0) * x(0) + S(1) * x(1) + S(2) * x(2);
    const CVec3 up_exact = xc * (ball_transform(p.k_p(w), R) * sx);
    const CVec3 us_exact = (S - xc * sx) * ball_transform(p.k_s(w), R);
    EXPECT_LT(rel(up, up_exact), 1e-6);
    EXPECT_LT(rel(us, us_exact), 1e-6);
  }
  const auto z = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), R), CVec3(CVec3::Zero()));
  const auto [zp, zs] = elastic_far_field_3d(z, p, Vec3(0, 0, 1), 2.0);
  EXPECT_EQ(zp, CVec3::Zero());
  EXPECT_EQ(zs, CVec3::Zero());
}

TEST(ElasticFarField, PolarizationForSmoothSources) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto p = PhysicsParams::elastic(1, 1);
  const auto s2 = sources::example_two();
  const auto s3 = sources::bump_source<3>(Vec3(0.1, 0, -0.1), 0.6, Vec3(1, 2, 3));
  for (int i = 0; i < 10; ++i) {
    const Vec2 x2 = Vec2(u(rng), u(rng)).normalized();
    const auto [up, us] = elastic_far_field_2d(s2, p, x2, 1 + 10 * std::abs(u(rng)));
    const CVec2 xc = x2.cast<complex>();
    EXPECT_LE((up - xc * (up(0) * x2(0) + up(1) * x2(1))).norm(), 1e-10 * up.norm());
    EXPECT_LE(std::abs(us(0) * x2(0) + us(1) * x2(1)), 1e-12 * us.norm());

    const Vec3 x3 = Vec3(u(rng), u(rng), u(rng)).normalized();
    const auto [vp, vs] = elastic_far_field_3d(s3, p, x3, 1 + 10 * std::abs(u(rng)));
    const CVec3 yc = x3.cast<complex>();
    EXPECT_LE((vp - yc * (vp.transpose() * x3.cast<complex>())(0)).norm(), 1e-10 * vp.norm());
    EXPECT_LE(std::abs((vs.transpose() * yc)(0)), 1e-12 * vs.norm());
  }
}

TEST(ElasticFarField, FourierIdentity) {
  // u_p(x, w) + u_s(x, (k_p/k_s) w) = F[S](k_p x)
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1), w(0.2, 50);
  const auto p = PhysicsParams::elastic(1.5, 0.7);
  const auto s2 = sources::bump_source<2>(Vec2(0.3, -0.4), 1.2, Vec2(1, -2), 8);
  const auto s3 = sources::bump_source<3>(Vec3(0.1, 0.2, -0.1), 0.6, Vec3(1, 2, -1), 8);
  for (int i = 0; i < 20; ++i) {
    const double om = w(rng);
    const double ratio = p.k_p(om) / p.k_s(om);
    const Vec2 x2 = Vec2(u(rng), u(rng)).normalized();
    const CVec2 lhs2 = elastic_far_field_2d(s2, p, x2, om).first + elastic_far_field_2d(s2, p, x2, ratio * om).second;
    EXPECT_LT(rel(lhs2, fourier_transform(s2, Vec2(p.k_p(om) * x2))), 1e-6);

    const Vec3 x3 = Vec3(u(rng), u(rng), u(rng)).normalized();
    const CVec3 lhs3 = elastic_far_field_3d(s3, p, x3, om).first + elastic_far_field_3d(s3, p, x3, ratio * om).second;
    EXPECT_LT(rel(lhs3, fourier_transform(s3, Vec3(p.k_p(om) * x3))), 1e-6);
  }
}

TEST(FourierTransform, ZeroFrequencyIsIntegral) {
  const auto s = sources::example_one();
  const auto f = fourier_transform(s, Vec2(Vec2::Zero()));
  EXPECT_NEAR(std::abs(f[0].imag()), 0.0, 1e-12);
  EXPECT_GE(f[0].real(), 4 * pi * 1.5 * 1.5);
  EXPECT_GE(f[1].real(), 4 * pi * 1.5 * 1.5);
  // int_disk (|z| + 5) = 2 pi R^3 / 3 + 5 pi R^2
  EXPECT_NEAR(f[0].real(), 2 * pi * 1.5 * 1.5 * 1.5 / 3 + 5 * pi * 1.5 * 1.5, 1e-9);
}

TEST(FourierTransform, BallClosedForm) {
  const auto s = sources::constant_on(SupportShape<3>::ball(Vec3(0.1, 0, 0), 0.5), CVec3(1, 0, 0));
  for (double r : {0.0, 0.7, 5.0, 19.0, 33.0, 50.0}) {
    const Vec3 xi = r * Vec3(0.48, 0.6, 0.64);
    const complex expect = ball_transform(r, 0.5) * std::exp(complex(0, -xi.x() * 0.1));
    EXPECT_LT(std::abs(fourier_transform(s, xi)[0] - expect), 1e-6 * std::abs(expect)) << r;
  }
  const auto z = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), 0.5), CVec3(CVec3::Zero()));
  EXPECT_EQ(fourier_transform(z, Vec3(1, 2, 3)), CVec3::Zero());
}

TEST(EmFarField, BallOracle) {
  const auto s = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), 0.5), CVec3(0, 0, 1));
  const auto [E, H] = em_far_fields(s, PhysicsParams::em(1, 1), Vec3(1, 0, 0), 2.0);
  EXPECT_NEAR(std::abs(E[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(E[1]), 0.0, 1e-12);
  EXPECT_NEAR(E[2].imag(), 0.0753, 1e-3);
  EXPECT_NEAR(E[2].imag(), 2 * ball_transform(2.0, 0.5) / (4 * pi), 1e-10);
  EXPECT_NEAR(std::abs(E[2].real()), 0.0, 1e-12);
}

TEST(EmFarField, ClosedFormUpTo50) {
  const auto p = PhysicsParams::em(2.0, 1.5);
  const CVec3 J(1.0, -0.5, 2.0);
  const auto s = sources::constant_on(SupportShape<3>::ball(Vec3::Zero(), 0.5), J);
  const Vec3 x = Vec3(1, 2, -0.5).normalized();
  for (double k : {0.5, 2.0, 20.0, 50.0}) {
    const auto [E, H] = em_far_fields(s, p, x, k);
    const CVec3 xc = x.cast<complex>();
    const CVec3 F = J * ball_transform(k, 0.5);
    const CVec3 E_exact = (I * k / (4 * pi * std::sqrt(2.0))) * (F - xc * (F.transpose() * xc)(0));
    EXPECT_LT(rel(E, E_exact), 1e-6) << k;
    EXPECT_LT(rel(H, CVec3(std::sqrt(2.0 / 1.5) * cross(xc, E_exact))), 1e-6) << k;
  }
}

TEST(EmFarField, Orthogonality) {
  const auto s = sources::example_four();
  const auto p = PhysicsParams::em(1.3, 0.8);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10; ++i) {
    const Vec3 x = Vec3(u(rng), u(rng), u(rng)).normalized();
    const auto [E, H] = em_far_fields(s, p, x, 1 + 20 * std::abs(u(rng)));
    const CVec3 xc = x.cast<complex>();
    EXPECT_LE(std::abs((E.transpose() * xc)(0)), 1e-12 * E.norm());
    EXPECT_LE(std::abs((H.transpose() * E)(0)), 1e-12 * E.squaredNorm());
    EXPECT_LE((H - std::sqrt(1.3 / 0.8) * cross(xc, E)).norm(), 1e-12 * H.norm());
  }
  EXPECT_THROW(em_far_fields(s, p, Vec3(1, 0, 0), 0.0), Error);
}

TEST(Dataset, ZeroSourceRecords) {
  const auto s = sources::constant_on(SupportShape<2>::disk(Vec2::Zero(), 1.0), CVec2(CVec2::Zero()));
  const auto ds = synthesize_dataset(s, PhysicsParams::elastic(1, 1), theta_circle(4), frequency_grid(1.0, 2));
  EXPECT_EQ(ds.record_count(), 8u);
  for (auto v : ds.values) EXPECT_EQ(v, complex{});
}

TEST(Dataset, ExampleTwoRecordsAndTangentiality) {
  const auto ds =
      synthesize_dataset(sources::example_two(), PhysicsParams::elastic(1, 1), theta_circle(51), frequency_grid(0.5, 80));
  EXPECT_EQ(ds.record_count(), 4080u);
  EXPECT_EQ(ds.problem(), "elastic2d");
  for (std::size_t l = 0; l < 51; ++l) {
    const Vec2 x = ds.directions[l];
    const CVec2 xc = x.cast<complex>();
    for (std::size_t m = 0; m < 80; ++m) {
      const CVec2 up = ds.block(l, m, 0), us = ds.block(l, m, 1);
      ASSERT_LE((up - xc * (up(0) * x(0) + up(1) * x(1))).norm(), 1e-10 * up.norm() + 1e-300);
      ASSERT_LE(std::abs(us(0) * x(0) + us(1) * x(1)), 1e-12 * us.norm() + 1e-300);
    }
  }
}

TEST(Dataset, MatchesPerRecordEvaluation) {
  // The dataset advances phases by recurrence; single records use direct
  // exponentials on the same rule.
  const auto s = sources::example_two();
  const auto p = PhysicsParams::elastic(1, 1);
  const auto freqs = frequency_grid(0.5, 100);
  const auto ds = synthesize_dataset(s, p, theta_circle(7), freqs);
  const auto rule = make_rule(s.support, p.k_s(freqs.max()), QuadratureKind::adapted);
  for (std::size_t l = 0; l < 7; ++l)
    for (int m : {0, 41, 99}) {
      const Vec2 x = ds.directions[l];
      const double w = freqs[m + 1];
      const auto [up, us] = detail::split_elastic<2>(x, detail::transform_with_rule(s, rule, Vec2(p.k_p(w) * x)),
                                                     detail::transform_with_rule(s, rule, Vec2(p.k_s(w) * x)));
      EXPECT_LE((ds.block(l, m, 0) - up).norm(), 1e-10 * up.norm());
      EXPECT_LE((ds.block(l, m, 1) - us).norm(), 1e-10 * us.norm());
    }
}

TEST(Dataset, EmBlocks) {
  const auto s = sources::example_four();
  const auto p = PhysicsParams::em(1, 1);
  const auto ds = synthesize_dataset(s, p, fibonacci_sphere(9), frequency_grid(0.5, 12));
  EXPECT_EQ(ds.problem(), "em3d");
  const auto [E, H] = em_far_fields(s, p, ds.directions[4], 0.5 * 7);
  EXPECT_LE((ds.block(4, 6, 0) - E).norm(), 1e-9 * E.norm());
  EXPECT_LE((ds.block(4, 6, 1) - H).norm(), 1e-9 * H.norm());
}

TEST(Dataset, Deterministic) {
  const auto s = sources::example_two();
  const auto p = PhysicsParams::elastic(1, 1);
  const auto a = synthesize_dataset(s, p, theta_circle(11), frequency_grid(0.5, 20));
  const auto b = synthesize_dataset(s, p, theta_circle(11), frequency_grid(0.5, 20));
  EXPECT_EQ(a.values, b.values);
  set_worker_count(1);
  const auto c = synthesize_dataset(s, p, theta_circle(11), frequency_grid(0.5, 20));
  set_worker_count(0);
  EXPECT_EQ(a.values, c.values);
}

TEST(Noise, ZeroDeltaKeepsValues) {
  const auto clean = synthesize_dataset(sources::example_two(), PhysicsParams::elastic(1, 1), theta_circle(5),
                                        frequency_grid(0.5, 4));
  const auto n = apply_noise(clean, 0.0, 99);
  EXPECT_EQ(n.values, clean.values);
  EXPECT_EQ(n.seed, 99u);
  EXPECT_EQ(n.noise_level, 0.0);
  EXPECT_THROW(apply_noise(clean, -0.1, 1), Error);
}

TEST(Noise, DeterministicAndSeedDependent) {
  const auto clean = synthesize_dataset(sources::example_two(), PhysicsParams::elastic(1, 1), theta_circle(5),
                                        frequency_grid(0.5, 4));
  const auto a = apply_noise(clean, 0.3, 42), b = apply_noise(clean, 0.3, 42), c = apply_noise(clean, 0.3, 43);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_DOUBLE_EQ(a.noise_level, 0.3);
}

TEST(Noise, MultiplierMoments) {
  // 10^4 records x 2 blocks; mean 1 + 0i and per-axis std delta within 5 sigma.
  const double delta = 0.3;
  const int N = 20000;
  double sr = 0, si = 0, sr2 = 0, si2 = 0, sri = 0;
  for (int l = 0; l < 100; ++l)
    for (int m = 1; m <= 100; ++m)
      for (int t = 0; t < 2; ++t) {
        const complex z = noise_multiplier(delta, 12345, l, m, t) - 1.0;
        sr += z.real(), si += z.imag();
        sr2 += z.real() * z.real(), si2 += z.imag() * z.imag(), sri += z.real() * z.imag();
      }
  const double mr = sr / N, mi = si / N;
  const double sd_mean = delta / std::sqrt(N);
  EXPECT_LT(std::abs(mr), 5 * sd_mean);
  EXPECT_LT(std::abs(mi), 5 * sd_mean);
  const double sd_std = delta / std::sqrt(2.0 * N);
  EXPECT_LT(std::abs(std::sqrt(sr2 / N - mr * mr) - delta), 5 * sd_std);
  EXPECT_LT(std::abs(std::sqrt(si2 / N - mi * mi) - delta), 5 * sd_std);
  // real and imaginary parts uncorrelated
  EXPECT_LT(std::abs(sri / N - mr * mi) / (delta * delta), 5 / std::sqrt(N));
}

TEST(Noise, BlocksIndependent) {
  const int N = 10000;
  double c = 0;
  for (int l = 0; l < N; ++l) c += (noise_multiplier(1.0, 7, l, 3, 0) - 1.0).real() * (noise_multiplier(1.0, 7, l, 3, 1) - 1.0).real();
  EXPECT_LT(std::abs(c / N), 5 / std::sqrt(N));
}

TEST(Noise, AppliedPerBlock) {
  const auto clean = synthesize_dataset(sources::example_four(), PhysicsParams::em(1, 1), fibonacci_sphere(6),
                                        frequency_grid(0.5, 5));
  const auto noisy = apply_noise(clean, 0.1, 8);
  for (std::size_t l = 0; l < 6; ++l)
    for (std::size_t m = 0; m < 5; ++m)
      for (int t = 0; t < 2; ++t) {
        const CVec3 expect = noise_multiplier(0.1, 8, l, m + 1, t) * clean.block(l, m, t);
        EXPECT_LE((noisy.block(l, m, t) - expect).norm(), 1e-15 * expect.norm());
      }
}

TEST(ComplexAlgebra, CrossIsBilinear) {
  const CVec3 a(complex(0, 1), 2.0, complex(1, -1)), b(1.0, complex(0, 3), complex(-2, 0.5));
  const CVec3 c = cross(a, b);
  EXPECT_EQ(c[0], a[1] * b[2] - a[2] * b[1]);
  EXPECT_EQ(c[1], a[2] * b[0] - a[0] * b[2]);
  EXPECT_EQ(c[2], a[0] * b[1] - a[1] * b[0]);
  EXPECT_EQ(cross(CVec3(I, 0, 0), CVec3(0, 1, 0)), CVec3(0, 0, I));
  EXPECT_EQ(cross(a, b), CVec3(-cross(b, a)));
}
