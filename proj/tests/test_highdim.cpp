#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "projlab/errors.hpp"
#include "projlab/highdim.hpp"

using namespace projlab;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

std::vector<double> lambda_grid() {
  std::vector<double> out;
  for (int i = -20; i <= 20; ++i) out.push_back(0.25 * i);
  return out;
}

// Points of a 2-plane patch spanned by two unit vectors in ℝ⁵.
AtomicMeasure plane_patch(const Eigen::VectorXd& u, const Eigen::VectorXd& w, int n) {
  std::vector<double> coords;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd p = ((i + 0.5) / n - 0.5) * u + ((j + 0.5) / n - 0.5) * w;
      coords.insert(coords.end(), p.data(), p.data() + p.size());
    }
  }
  const std::size_t count = coords.size() / 5;
  return AtomicMeasure(5, std::move(coords), std::vector<double>(count, 1.0 / count));
}

// Attractor of the 32 corner contractions of [0, 1]⁵ with ratio r, iterated `levels` times.
AtomicMeasure corner_dust(double ratio, int levels) {
  std::vector<Eigen::VectorXd> points{Eigen::VectorXd::Zero(5)};
  double scale = 1.0;
  for (int l = 0; l < levels; ++l) {
    std::vector<Eigen::VectorXd> next;
    next.reserve(points.size() * 32);
    for (const auto& p : points) {
      for (int corner = 0; corner < 32; ++corner) {
        Eigen::VectorXd q = p;
        for (int a = 0; a < 5; ++a) {
          if (corner >> a & 1) q(a) += scale * (1.0 - ratio);
        }
        next.push_back(q);
      }
    }
    points = std::move(next);
    scale *= ratio;
  }
  std::vector<double> coords;
  for (const auto& p : points) coords.insert(coords.end(), p.data(), p.data() + 5);
  return AtomicMeasure(5, std::move(coords), std::vector<double>(points.size(), 1.0 / points.size()));
}

}  // namespace

TEST_CASE("block rotation field is a unit tangent field") {
  const auto field = make_vector_field(4);
  CHECK((field(vec({1, 0, 0, 0})) - vec({0, 1, 0, 0})).norm() < 1e-15);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd v(4);
    for (int a = 0; a < 4; ++a) v(a) = gauss(rng);
    v.normalize();
    CHECK(std::abs(field(v).norm() - 1.0) < 1e-14);
    CHECK(std::abs(field(v).dot(v)) < 1e-14);
  }
  CHECK(make_vector_field(6).dim() == 6);
  CHECK_THROWS_AS(make_vector_field(3), DomainError);
  CHECK_THROWS_AS(make_vector_field(5), DomainError);
  CHECK_THROWS_AS(LinearVectorField(Eigen::MatrixXd::Identity(4, 4)), PreconditionError);
}

TEST_CASE("chart points lie on the sphere and the jacobian matches differences") {
  const HemisphereChart chart(4);
  const auto samples = chart_samples(4, 0.5, 50, 11);
  for (const auto& y : samples) {
    CHECK(y.norm() <= 0.5 + 1e-12);
    CHECK(std::abs(chart.point(y).norm() - 1.0) < 1e-14);
    const Eigen::MatrixXd jac = chart.jacobian(y);
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-6;
      Eigen::VectorXd hi = y, lo = y;
      hi(i) += h;
      lo(i) -= h;
      if (hi.norm() > 0.5 || lo.norm() > 0.5) continue;
      const Eigen::VectorXd fd = (chart.point(hi) - chart.point(lo)) / (2 * h);
      CHECK((fd - jac.col(i)).norm() < 1e-8);
    }
  }
  CHECK_THROWS_AS(chart.point(vec({0.6, 0, 0})), PreconditionError);
  CHECK_THROWS_AS(chart.point(vec({0.1, 0})), PreconditionError);
}

TEST_CASE("field family: orthonormal pair and pole values") {
  const auto field = make_vector_field(4);
  const HemisphereChart chart(4);
  const auto fam = family_from_field(field, chart);
  const Eigen::VectorXd g0 = fam.G(Eigen::VectorXd::Zero(3));
  CHECK((g0 - vec({0, 0, 0, 1, -1}) / std::sqrt(2.0)).norm() < 1e-15);
  CHECK((fam.F(Eigen::VectorXd::Zero(3)) - vec({0, 0, -1, 0, 0})).norm() < 1e-15);
  for (const auto& y : chart_samples(4, 0.5, 100, 5)) {
    CHECK(std::abs(fam.F(y).norm() - 1.0) < 1e-12);
    CHECK(std::abs(fam.G(y).norm() - 1.0) < 1e-12);
    CHECK(std::abs(fam.F(y).dot(fam.G(y))) < 1e-12);
    CHECK_NOTHROW(fam.check_sample(y));
  }
  // Boundary of the chart ball: derivatives stay finite.
  for (const auto& y : {vec({0.5, 0, 0}), vec({0, -0.5, 0}), vec({0.3, 0.4, 0})}) {
    CHECK(fam.DF(y).allFinite());
    CHECK(fam.DG(y).allFinite());
  }
  CHECK_THROWS_AS(family_from_field(field, HemisphereChart(4, 0.8)), PreconditionError);
  CHECK_THROWS_AS(family_from_field(field, HemisphereChart(6)), PreconditionError);
}

TEST_CASE("field family satisfies the rank conditions for d = 4 and d = 6") {
  const auto lambdas = lambda_grid();
  for (int d : {4, 6}) {
    const auto fam = family_from_field(make_vector_field(d), HemisphereChart(d));
    const auto samples = chart_samples(d, 0.5, d == 4 ? 1000 : 200, 17);
    const RankReport rep = verify_rank_conditions(fam, samples, lambdas);
    CHECK(rep.passed());
    CHECK(rep.offending.empty());
    CHECK(rep.min_det_lambda > 1e-3);
    CHECK(rep.min_det_pencil > 0.0);
    CHECK(rep.max_extra_sv_F_DG < 1e-12);
    CHECK(rep.samples == samples.size());
  }
}

TEST_CASE("model cone curve passes and the great circle fails on rank DG") {
  std::vector<Eigen::VectorXd> thetas;
  for (int i = 0; i < 64; ++i) thetas.push_back(vec({kTwoPi * i / 64.0}));
  const auto lambdas = lambda_grid();

  const auto cone = family_from_curve(SphereCurve::model());
  const RankReport ok = verify_rank_conditions(cone, thetas, lambdas);
  CHECK(ok.passed());
  // |det(F, G, DF + λDG)| equals the θ-speed 1/√2 of the model curve, for every λ.
  CHECK(ok.min_det_lambda == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  CHECK(ok.min_det_pencil == doctest::Approx(std::sqrt(0.5) * 1e-3).epsilon(1e-6));

  const auto circle = family_from_curve(SphereCurve::great_circle());
  const RankReport bad = verify_rank_conditions(circle, thetas, lambdas);
  CHECK_FALSE(bad.rank_DG);
  CHECK(bad.min_sv_DG < 1e-12);
  CHECK_FALSE(bad.passed());
  CHECK(bad.offending.size() == thetas.size());
}

TEST_CASE("pencil determinant scales with mu0 near the edge") {
  const auto fam = family_from_field(make_vector_field(4), HemisphereChart(4));
  const auto samples = chart_samples(4, 0.5, 50, 23);
  RankCheckOptions wide;
  wide.mu_min = 1e-3;
  RankCheckOptions narrow;
  narrow.mu_min = 1e-1;
  const double lo = verify_rank_conditions(fam, samples, {}, wide).min_det_pencil;
  const double hi = verify_rank_conditions(fam, samples, {}, narrow).min_det_pencil;
  CHECK(lo > 0.0);
  CHECK(hi > lo);
  RankCheckOptions invalid;
  invalid.mu_min = 0.0;
  CHECK_THROWS_AS(verify_rank_conditions(fam, samples, {}, invalid), PreconditionError);
}

TEST_CASE("transversality determinant") {
  const auto field = make_vector_field(4);
  const HemisphereChart chart(4);
  const Eigen::VectorXd lambda = vec({0.1, -0.2, 0.05});

  const auto [x, y] = degenerate_pair(chart, lambda);
  const auto degenerate = transversality_determinant(field, chart, lambda, x, y);
  CHECK(std::abs(degenerate.determinant) < 1e-10);
  // The degenerate pair projects to a point of the first axis only.
  CHECK(std::abs(degenerate.pi(1)) < 1e-12);

  const Eigen::VectorXd vertical = vec({0, 0, 0, 0, 1});
  const auto flat = transversality_determinant(field, chart, lambda, vertical, -vertical);
  CHECK(std::abs(flat.determinant) < 1e-15);

  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss;
  int generic = 0;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
      a(k) = gauss(rng);
      b(k) = gauss(rng);
    }
    const auto t = transversality_determinant(field, chart, lambda, a, b);
    CHECK(t.determinant >= 0.0);
    if (t.determinant > 1e-6) ++generic;
  }
  CHECK(generic == 100);
  CHECK_THROWS_AS(transversality_determinant(field, chart, lambda, x, x), PreconditionError);
}

TEST_CASE("projection frame rows are orthonormal") {
  const auto field = make_vector_field(6);
  const HemisphereChart chart(6);
  for (const auto& y : chart_samples(6, 0.5, 20, 2)) {
    const Eigen::MatrixXd frame = projection_frame(field, chart.point(y));
    CHECK((frame * frame.transpose() - Eigen::Matrix2d::Identity()).norm() < 1e-13);
  }
}

TEST_CASE("high-dimensional projection scan") {
  const auto field = make_vector_field(4);
  const HemisphereChart chart(4);
  const auto points = chart_samples(4, 0.3, 8, 9);

  SUBCASE("plane patch keeps dimension 2") {
    const AtomicMeasure patch = plane_patch(vec({0, 0, 1, 0, 0}), vec({0, 0, 0, 0, 1}), 128);
    ScanConfig config;
    config.alpha = 2.0;
    const HdScanReport rep = hd_projection_scan(patch, field, chart, points, config);
    CHECK(rep.rows.size() == points.size());
    CHECK(rep.median_estimate == doctest::Approx(2.0).epsilon(0.08));
    CHECK(rep.bound == 2.0);
    CHECK_FALSE(rep.positive_area);
  }

  SUBCASE("corner dust of dimension 1.5") {
    const AtomicMeasure dust = corner_dust(std::pow(2.0, -10.0 / 3.0), 3);
    ScanConfig config;
    config.alpha = 1.5;
    const HdScanReport rep = hd_projection_scan(dust, field, chart, points, config);
    CHECK(rep.median_estimate >= 1.35);
    CHECK(rep.median_estimate <= 1.65);
    CHECK(rep.bound == 1.5);
  }

  SUBCASE("frame condition at the pole") {
    const AtomicMeasure patch = plane_patch(vec({0, 0, 1, 0, 0}), vec({0, 0, 0, 0, 1}), 128);
    const std::vector<Eigen::VectorXd> pole{Eigen::VectorXd::Zero(3)};
    const HdScanReport rep = hd_projection_scan(patch, field, chart, pole, ScanConfig{});
    CHECK(rep.rows[0].frame_condition < 10.0);
    CHECK(rep.rows[0].frame_condition >= 1.0);
  }

  SUBCASE("preconditions") {
    const AtomicMeasure patch = plane_patch(vec({0, 0, 1, 0, 0}), vec({0, 0, 0, 0, 1}), 4);
    CHECK_THROWS_AS(hd_projection_scan(patch, make_vector_field(2), HemisphereChart(2), points, {}),
                    DomainError);
    CHECK_THROWS_AS(hd_projection_scan(patch, field, chart, {}, {}), PreconditionError);
    const AtomicMeasure wrong(3, {0, 0, 0}, {1.0});
    CHECK_THROWS_AS(hd_projection_scan(wrong, field, chart, points, {}), PreconditionError);
  }
}
