#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "projlab/errors.hpp"
#include "projlab/geometry.hpp"

using namespace projlab;

namespace {

bool near(Vec3 a, Vec3 b, double tol) { return norm(a - b) <= tol; }

// Dense (λ, θ) grid minimum of |p − λγ(θ)|, independent of the library search.
double grid_cone_distance(Vec3 p, int n_theta = 4000, int n_lambda = 4000) {
  const double lmax = 2.0 * norm(p) + 1.0;
  double best = 1e300;
  for (int i = 0; i < n_theta; ++i) {
    const double t = kTwoPi * i / n_theta;
    const Vec3 g{std::cos(t) / kSqrt2, std::sin(t) / kSqrt2, 1.0 / kSqrt2};
    for (int k = 0; k <= n_lambda; ++k) {
      const double lambda = -lmax + 2.0 * lmax * k / n_lambda;
      best = std::min(best, norm(p - lambda * g));
    }
  }
  return best;
}

// 3×3 determinant by cofactor expansion on the first row.
double cofactor_det(const double m[3][3]) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

}  // namespace

TEST_CASE("model frame at 0 and pi") {
  const auto c = SphereCurve::model();
  const auto j0 = curve_eval(c, 0.0);
  CHECK(near(j0.gamma, Vec3{1, 0, 1} / kSqrt2, 1e-15));
  CHECK(near(j0.frame.e1, Vec3{0, 1, 0}, 1e-15));
  CHECK(near(j0.frame.e2, Vec3{-1, 0, 1} / kSqrt2, 1e-15));
  const auto jp = curve_eval(c, kPi);
  CHECK(near(jp.gamma, Vec3{-1, 0, 1} / kSqrt2, 1e-15));
  CHECK(near(jp.frame.e1, Vec3{0, -1, 0}, 1e-15));
  CHECK(near(jp.frame.e2, Vec3{1, 0, 1} / kSqrt2, 1e-15));
}

TEST_CASE("model frame equals scaled tangent and its cross product") {
  const auto c = SphereCurve::model();
  for (double t = 0.0; t < kTwoPi; t += 0.37) {
    const auto j = curve_eval(c, t);
    CHECK(near(j.frame.e1, kSqrt2 * j.d1, 1e-15));
    CHECK(near(j.frame.e2, cross(j.gamma, kSqrt2 * j.d1), 1e-15));
  }
}

TEST_CASE("frame orthonormality on several curves") {
  const auto circle = SphereCurve::small_circle(0.9);
  const auto j = curve_eval(circle, kPi / 3);
  const Vec3 v[3] = {j.frame.e1, j.frame.e2, j.gamma};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) CHECK(std::abs(dot(v[a], v[b]) - (a == b ? 1.0 : 0.0)) < 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, kTwoPi);
  const auto custom = SphereCurve::custom(
      [](double t) { return normalized(Vec3{std::cos(t), std::sin(t), 0.3 * std::sin(3 * t)}); },
      0.0, kTwoPi, true);
  for (const SphereCurve* curve : {&circle, &custom}) {
    for (int i = 0; i < 200; ++i) {
      const auto jj = curve_eval(*curve, u(rng));
      CHECK(std::abs(norm(jj.gamma) - 1.0) < 1e-12);
      CHECK(std::abs(dot(jj.gamma, jj.d1)) < 1e-10);
      CHECK(std::abs(norm(jj.frame.e1) - 1.0) < 1e-12);
      CHECK(std::abs(norm(jj.frame.e2) - 1.0) < 1e-12);
      CHECK(std::abs(dot(jj.frame.e1, jj.frame.e2)) < 1e-12);
      CHECK(std::abs(dot(jj.frame.e2, jj.gamma)) < 1e-12);
    }
  }
}

TEST_CASE("model frame is 2pi periodic") {
  const auto c = SphereCurve::model();
  for (double t = 0.0; t < kTwoPi; t += 0.1) {
    const auto a = curve_eval(c, t);
    const auto b = curve_eval(c, t + kTwoPi);
    CHECK(near(a.frame.e1, b.frame.e1, 1e-14));
    CHECK(near(a.frame.e2, b.frame.e2, 1e-14));
  }
}

TEST_CASE("nonperiodic custom curve rejects parameters outside its domain") {
  const auto c = SphereCurve::custom(
      [](double t) { return Vec3{std::cos(t), std::sin(t), 0.0}; }, 0.0, 1.0, false);
  CHECK_NOTHROW(curve_eval(c, 0.5));
  CHECK_THROWS_AS(curve_eval(c, 1.5), DomainError);
  CHECK_THROWS_AS(curve_eval(c, -0.1), DomainError);
}

TEST_CASE("cone distance examples") {
  CHECK(cone_distance({1, 0, 1}) == 0.0);
  CHECK(std::abs(cone_distance({3, 4, 5})) < 1e-15);
  const double oracle = grid_cone_distance({0, 1, 3});
  CHECK(std::abs(oracle - kSqrt2) < 1e-3);
  CHECK(std::abs(cone_distance({0, 1, 3}) - kSqrt2) < 1e-12);
}

TEST_CASE("cone distance vanishes on the cone") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ut(0.0, kTwoPi), ul(-5.0, 5.0);
  const auto c = SphereCurve::model();
  for (int i = 0; i < 1000; ++i) {
    const double lambda = ul(rng);
    CHECK(cone_distance(lambda * c.eval(ut(rng))) < 1e-10);
  }
}

TEST_CASE("cone distance search agrees with the rotational closed form below the vertex") {
  // For the double cone the distance is ||ρ| − |z||/√2 whatever the sign of z.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{u(rng), u(rng), -std::abs(u(rng))};
    const double expected = std::abs(std::hypot(p.x, p.y) - std::abs(p.z)) / kSqrt2;
    CHECK(std::abs(cone_distance(p) - expected) < 1e-6);
  }
}

TEST_CASE("triple product jacobian") {
  const auto c = SphereCurve::model();
  CHECK(std::abs(triple_product_jacobian(c, 4.0, 0.3, 1.1) + 1.0) < 1e-14);
  CHECK(std::abs(triple_product_jacobian(c, 0.0, 2.0, 0.4)) < 1e-15);

  // Oracle: finite-difference derivatives of the bare formula and a cofactor determinant.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ut(0.0, kTwoPi), ue(-3.0, 3.0);
  auto g = [](double t) { return Vec3{std::cos(t), std::sin(t), 1.0} / kSqrt2; };
  for (int i = 0; i < 100; ++i) {
    const double t = ut(rng);
    const double eta2 = ue(rng);
    const double h = 1e-4;
    const Vec3 d1 = (8.0 * (g(t + h) - g(t - h)) - (g(t + 2 * h) - g(t - 2 * h))) / (12 * h);
    const Vec3 d2 =
        (16.0 * (g(t + h) + g(t - h)) - (g(t + 2 * h) + g(t - 2 * h)) - 30.0 * g(t)) / (12 * h * h);
    const Vec3 col2 = cross(g(t), d1);
    const Vec3 col3 = 1.0 * d2 + eta2 * cross(g(t), d2);
    const double m[3][3] = {{d1.x, col2.x, col3.x}, {d1.y, col2.y, col3.y}, {d1.z, col2.z, col3.z}};
    CHECK(std::abs(cofactor_det(m) + 0.25) < 1e-7);
    CHECK(std::abs(triple_product_jacobian(c, 1.0, eta2, t) + 0.25) < 1e-10);
  }
}

TEST_CASE("polar change") {
  const auto a = polar_change(1.0, 0.0);
  CHECK(a.eta1 == 1.0);
  CHECK(a.eta2 == 0.0);
  CHECK(a.jacobian == 1.0);
  const auto b = polar_change(2.0, 0.6);
  CHECK(std::abs(b.eta1 - 1.6) < 1e-15);
  CHECK(std::abs(b.eta2 - 1.2) < 1e-15);
  CHECK(std::abs(b.jacobian - 2.5) < 1e-15);
  // Oracle: central-difference Jacobian determinant of (r, t) ↦ (η1, η2).
  const double h = 1e-6;
  auto map = [](double r, double t) {
    return std::pair{r * std::sqrt(1 - t * t), r * t};
  };
  const auto [a1, a2] = map(2.0 + h, 0.6);
  const auto [b1, b2] = map(2.0 - h, 0.6);
  const auto [c1, c2] = map(2.0, 0.6 + h);
  const auto [d1, d2] = map(2.0, 0.6 - h);
  const double fd = ((a1 - b1) * (c2 - d2) - (a2 - b2) * (c1 - d1)) / (4 * h * h);
  CHECK(std::abs(std::abs(fd) - 2.5) / 2.5 < 1e-6);

  double prev = 0.0;
  for (double t : {0.9, 0.99, 0.999, 0.9999, 0.99999}) {
    const auto p = polar_change(5.0, t);
    CHECK(p.jacobian > prev);
    prev = p.jacobian;
    CHECK(std::abs(std::hypot(p.eta1, p.eta2) - 5.0) < 1e-12);
    CHECK(std::abs(p.eta2 / 5.0 - t) < 1e-12);
  }
  const auto s = polar_change(5.0, 1.0);
  CHECK(s.singular);
  CHECK(std::isinf(s.jacobian));
  CHECK_THROWS_AS(polar_change(0.0, 0.5), PreconditionError);
}

TEST_CASE("gamma_t") {
  const auto c = SphereCurve::model();
  CHECK(near(gamma_t_eval(c, 0.0, 1.0), Vec3{-0.5, 0.0, 0.5}, 1e-15));
  CHECK(near(gamma_t_eval(c, 0.0, 0.0), Vec3{0.0, 1.0 / kSqrt2, 0.0}, 1e-15));
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ut(0.0, kTwoPi), u01(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double t = ut(rng);
    CHECK(std::abs(norm(gamma_t_eval(c, t, u01(rng))) - 1.0 / kSqrt2) < 1e-12);
    CHECK(near(gamma_t_eval(c, t, 1.0), 0.5 * Vec3{-std::cos(t), -std::sin(t), 1.0}, 1e-15));
  }
}

TEST_CASE("geodesic curvature") {
  const auto great = SphereCurve::great_circle();
  for (double t = 0.0; t < kTwoPi; t += 0.5) CHECK(std::abs(geodesic_curvature(great, t)) < 1e-15);

  const auto model = SphereCurve::model();
  const double k0 = geodesic_curvature(model, 0.0);
  CHECK(std::abs(k0 - 1.0 / (2.0 * kSqrt2)) < 1e-15);
  for (double t = 0.0; t < kTwoPi; t += 0.01)
    CHECK(std::abs(geodesic_curvature(model, t) - k0) / k0 < 1e-10);

  // Custom curve with curvature changing sign; roots located by bisection.
  const auto wavy = SphereCurve::custom(
      [](double t) { return normalized(Vec3{std::cos(t), std::sin(t), 0.3 * std::sin(3 * t)}); },
      0.0, kTwoPi, true);
  const auto roots = curvature_zero_crossings(wavy, 512);
  CHECK(roots.size() >= 2);
  for (double r : roots) {
    CHECK(std::abs(geodesic_curvature(wavy, r)) < 1e-6);
    CHECK(geodesic_curvature(wavy, r - 1e-3) * geodesic_curvature(wavy, r + 1e-3) < 0.0);
  }
  CHECK(curvature_zero_crossings(model).empty());
}

TEST_CASE("angle distance") {
  CHECK(angle_distance(0.1, kTwoPi - 0.1) == doctest::Approx(0.2));
  CHECK(angle_distance(0.0, kPi) == doctest::Approx(kPi));
  CHECK(angle_distance(3 * kTwoPi + 1.0, 1.0) < 1e-12);
}

TEST_CASE("proof exponents and bounds") {
  CHECK(std::abs(model_curve_bound(2.0) - 31.0 / 18.0) < 1e-15);
  CHECK(std::abs((4 * 2.25 / 9 + 5.0 / 6) - (2 * 2.25 + 1) / 3) < 1e-15);
  for (int i = 0; i < 15; ++i) {
    const double a = 1.5 + 0.05 * i;
    CHECK((2 * a + 1) / 3 < 4 * a / 9 + 5.0 / 6);
  }
  const auto e = proof_exponents(2.0, 0.01);
  CHECK(e.alpha == doctest::Approx(1.99));
  CHECK(e.alpha_star == doctest::Approx(1.99 / 3 + 1 - 0.01));
  CHECK(e.s_prime == doctest::Approx(model_curve_bound(1.99) - 5.0));
  CHECK(e.kappa == doctest::Approx(1.0 - 1e-7));
  CHECK(curved_family_bound(0.5) == 0.5);
  CHECK(curved_family_bound(1.5) == 1.25);
  CHECK(curved_family_bound(2.4) == doctest::Approx(1.9));
  CHECK(std::isinf(curved_family_bound(2.8)));
}
