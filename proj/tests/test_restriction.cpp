#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "projlab/errors.hpp"
#include "projlab/restriction.hpp"

using namespace projlab;

namespace {

AtomicMeasure segment_measure(Vec3 direction, std::size_t atoms) {
  std::vector<double> coords;
  std::vector<double> weights(atoms, 1.0 / static_cast<double>(atoms));
  for (std::size_t i = 0; i < atoms; ++i) {
    const double t = -0.5 + (i + 0.5) / static_cast<double>(atoms);
    coords.insert(coords.end(), {t * direction.x, t * direction.y, t * direction.z});
  }
  return AtomicMeasure(3, coords, weights);
}

AtomicMeasure point_mass() {
  const Vec3 origin{};
  return AtomicMeasure::uniform({&origin, 1});
}

// Direction of γ(0) × γ′(0) for the model curve: ⟨γ(θ), u⟩ vanishes to second order at 0.
Vec3 tangent_plane_normal() { return normalized(Vec3{-1.0, 0.0, 1.0}); }

// Exact integral of |p|^6 (or |p|^4) for a small trigonometric polynomial by sampling
// on a grid finer than the degree of |F|^p.
double grid_moment(const std::vector<LatticeFreq>& freq, const std::vector<cplx>& coef, double p,
                   int samples) {
  double acc = 0.0;
  for (int a = 0; a < samples; ++a) {
    for (int b = 0; b < samples; ++b) {
      for (int c = 0; c < samples; ++c) {
        cplx v{};
        for (std::size_t i = 0; i < freq.size(); ++i) {
          const double phase = kTwoPi * (freq[i][0] * a + freq[i][1] * b + freq[i][2] * c) / samples;
          v += coef[i] * std::polar(1.0, phase);
        }
        acc += std::pow(std::abs(v), p);
      }
    }
  }
  return acc / (static_cast<double>(samples) * samples * samples);
}

}  // namespace

TEST_CASE("a unit atom has a flat transform") {
  const double avg = conical_average(point_mass(), SphereCurve::model(), 7.0);
  CHECK(avg == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("two atoms match the closed-form cosine integrand") {
  const std::vector<double> coords{0, 0, 0.5, 0, 0, -0.5};
  const std::vector<double> weights{0.3, 0.3};
  const AtomicMeasure mu(3, coords, weights);
  const ConicalQuadrature q{32, 64};
  for (double R : {1.0, 3.0, 17.5, 100.0}) {
    // μ̂(Rργ(θ)) = 0.6 cos(πRρ/√2), independent of θ.
    double oracle = 0.0;
    for (std::size_t i = 0; i < q.n_rho; ++i) {
      const double rho = 0.5 + (i + 0.5) * 0.5 / q.n_rho;
      const double v = 0.6 * std::cos(kPi * R * rho / kSqrt2);
      oracle += v * v;
    }
    oracle *= kTwoPi * 0.5 / q.n_rho;
    CHECK(conical_average(mu, SphereCurve::model(), R, q) == doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("the average scales quadratically in the mass") {
  const AtomicMeasure seg = segment_measure(normalized(Vec3{1, 2, 3}), 300);
  const double one = conical_average(seg, SphereCurve::model(), 12.0);
  const double two = conical_average(seg.scaled(2.0), SphereCurve::model(), 12.0);
  CHECK(two == doctest::Approx(4.0 * one).epsilon(1e-12));
}

TEST_CASE("grid averages of a Gaussian match the radial closed form") {
  const GridSpec grid{64, 4.0};
  const double sigma = 0.3;
  const GridField g = gaussian_density(grid, sigma);
  for (double R : {1.0, 2.0, 3.0}) {
    // |μ̂(ξ)|² = exp(−4π²σ²|ξ|²) with |ξ| = Rρ.
    const double a = 2.0 * kPi * sigma * R;
    const double exact = kTwoPi * std::sqrt(kPi) / (2.0 * a) * (std::erf(a) - std::erf(0.5 * a));
    CHECK(conical_average(g, SphereCurve::model(), R) == doctest::Approx(exact).epsilon(0.01));
  }
  CHECK_THROWS_AS(conical_average(g, SphereCurve::model(), 4.0), ResolutionError);
}

TEST_CASE("preconditions of the conical average") {
  CHECK_THROWS_AS(conical_average(point_mass(), SphereCurve::model(), 0.5), PreconditionError);
  const std::vector<double> far{0, 0, 1.5};
  const std::vector<double> w{1.0};
  CHECK_THROWS_AS(conical_average(AtomicMeasure(3, far, w), SphereCurve::model(), 2.0), PreconditionError);
  CHECK_THROWS_AS(conical_average(point_mass(), SphereCurve::model(), 2.0, {1, 64}), PreconditionError);
}

TEST_CASE("segment in the tangent plane decays like R^{-1/2}") {
  const auto radii = dyadic_range(1, 7);
  const auto series = conical_average_series(segment_measure(tangent_plane_normal(), 2048),
                                             SphereCurve::model(), radii);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    CHECK(series.quadrature_error[i] < 1e-3 * series.values[i]);
  }
  const BetaEstimate est = beta_fit(series);
  CHECK(est.beta >= 0.35);
  CHECK(est.beta == doctest::Approx(0.5).epsilon(0.1));
  CHECK_FALSE(est.flagged);
}

TEST_CASE("point mass shows no decay") {
  const auto series = conical_average_series(point_mass(), SphereCurve::model(), dyadic_range(1, 7));
  CHECK(std::abs(beta_fit(series).beta) <= 0.05);
}

TEST_CASE("uniform ball decays at least at the top table rate") {
  const GridSpec grid{128, 2.0};
  GridField ball(grid, Space::spatial);
  for (std::size_t i = 0; i < grid.n; ++i) {
    for (std::size_t j = 0; j < grid.n; ++j) {
      for (std::size_t k = 0; k < grid.n; ++k) {
        if (norm(ball.point(i, j, k)) <= 1.0) ball.at(i, j, k) = 1.0;
      }
    }
  }
  ball *= 1.0 / ball.integral_real();
  const auto series = conical_average_series(ball, SphereCurve::model(), dyadic_range(0, 3));
  CHECK(beta_fit(series).beta >= beta_reference(3.0, 2, BetaFamily::cone_curve) - 0.3);
}

TEST_CASE("beta fit on synthetic series") {
  AverageSeries s;
  s.R = dyadic_range(0, 6);
  for (double R : s.R) s.values.push_back(3.0 / R);
  const BetaEstimate exact = beta_fit(s);
  CHECK(exact.beta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact.fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> noise(0.1, 10.0);
  AverageSeries white;
  white.R = dyadic_range(0, 9);
  for (std::size_t i = 0; i < white.R.size(); ++i) white.values.push_back(noise(rng));
  const BetaEstimate est = beta_fit(white);
  CHECK(est.fit.r2 < 0.9);
  CHECK(est.flagged);

  AverageSeries short_span;
  short_span.R = {1, 2, 3, 4};
  short_span.values = {1, 1, 1, 1};
  CHECK_THROWS_AS(beta_fit(short_span), PreconditionError);
  AverageSeries few;
  few.R = {1, 4, 16};
  few.values = {1, 1, 1};
  CHECK_THROWS_AS(beta_fit(few), PreconditionError);
  AverageSeries zero = s;
  zero.values[2] = 0.0;
  CHECK_THROWS_AS(beta_fit(zero), PreconditionError);
}

TEST_CASE("reference decay exponents") {
  CHECK(beta_reference(3.0, 2, BetaFamily::cone_curve) == doctest::Approx(2.0));
  CHECK(beta_reference(0.25, 2, BetaFamily::cone_curve) == doctest::Approx(0.25));
  CHECK(beta_reference(0.75, 2, BetaFamily::cone_curve) == doctest::Approx(0.5));
  CHECK(beta_reference(1.5, 2, BetaFamily::cone_curve) == doctest::Approx(0.75));
  CHECK(beta_reference(1.5, 4, BetaFamily::vector_field) == doctest::Approx(1.5));
  CHECK(beta_reference(5.0, 4, BetaFamily::vector_field) == doctest::Approx(4.0));
  CHECK_THROWS_AS(beta_reference(3.5, 2, BetaFamily::cone_curve), DomainError);
  CHECK_THROWS_AS(beta_reference(-0.1, 4, BetaFamily::vector_field), DomainError);
  CHECK_THROWS_AS(beta_reference(1.0, 3, BetaFamily::cone_curve), DomainError);
  CHECK_THROWS_AS(beta_reference(1.0, 2, BetaFamily::vector_field), DomainError);

  // Continuous and nondecreasing in α.
  auto sweep = [](int d, BetaFamily fam) {
    double prev = beta_reference(0.0, d, fam);
    for (int i = 1; i <= 4000; ++i) {
      const double v = beta_reference((d + 1.0) * i / 4000.0, d, fam);
      CHECK(v >= prev - 1e-12);
      CHECK(v - prev <= 2.0 * (d + 1.0) / 4000.0);
      prev = v;
    }
  };
  sweep(2, BetaFamily::cone_curve);
  for (int d = 3; d <= 8; ++d) sweep(d, BetaFamily::vector_field);
}

TEST_CASE("exact torus moments match grid sampling") {
  const std::vector<LatticeFreq> freq{{0, 1, 2}, {1, -1, 0}, {2, 0, 1}, {-1, 1, 1}, {1, 1, 0}};
  const std::vector<cplx> coef{{1, 0}, {0.5, -0.2}, {0, 1}, {-0.7, 0.3}, {0.2, 0.9}};
  const TorusPiece piece{freq, coef};
  for (double p : {2.0, 4.0, 6.0}) {
    const double oracle = std::pow(grid_moment(freq, coef, p, 20), 1.0 / p);
    CHECK(torus_lp_norm({&piece, 1}, p) == doctest::Approx(oracle).epsilon(1e-10));
  }
  const double mc = torus_lp_norm({&piece, 1}, 3.0, {1 << 16, 3});
  CHECK(mc == doctest::Approx(std::pow(grid_moment(freq, coef, 3.0, 24), 1.0 / 3.0)).epsilon(0.02));

  // Repeated frequencies merge before the moment sums.
  const TorusPiece doubled{{{0, 1, 2}, {0, 1, 2}}, {{1, 0}, {1, 0}}};
  CHECK(torus_lp_norm({&doubled, 1}, 6.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("decoupling ratio basics") {
  const DecouplingSetup setup = random_phase_pieces(4, 4, 9);
  CHECK(setup.period == 16);
  CHECK(setup.pieces.size() == setup.caps.size());

  DecouplingSetup single = setup;
  single.caps.resize(1);
  single.pieces.resize(1);
  CHECK(decoupling_ratio(single, 6.0) == doctest::Approx(1.0).epsilon(1e-12));

  for (int K : {2, 4, 8, 16}) {
    CHECK(decoupling_ratio(random_phase_pieces(K, 4, 3), 2.0) == doctest::Approx(1.0).epsilon(1e-6));
  }

  const double r6 = decoupling_ratio(setup, 6.0);
  CHECK(r6 >= 1.0);
  CHECK(r6 <= std::sqrt(static_cast<double>(setup.caps.size())));
  CHECK(decoupling_ratio(random_phase_pieces(4, 4, 9), 6.0) == r6);

  DecouplingSetup leaking = setup;
  leaking.pieces[0].freq[0][2] += 8;
  CHECK_THROWS_AS(decoupling_ratio(leaking, 6.0), PreconditionError);
  CHECK_THROWS_AS(decoupling_ratio(setup, 7.0), DomainError);
  CHECK_THROWS_AS(decoupling_ratio(setup, 1.5), DomainError);
}

TEST_CASE("decoupling ensembles are seeded") {
  const DecouplingEnsemble a = decoupling_ensemble(8, 6.0, 6, 40);
  const DecouplingEnsemble b = decoupling_ensemble(8, 6.0, 6, 40);
  CHECK(a.ratios == b.ratios);
  CHECK(a.max_ratio >= a.mean_ratio);
  CHECK(a.seeds.front() == 40);
  CHECK(a.max_ratio < std::sqrt(8.0));
}

TEST_CASE("packet profile is the inverse transform of its frequency profile") {
  // Values from quadrature of the frequency profile against cos(2πxξ), h = 0.3.
  const double h = 0.3;
  CHECK(packet_profile(0.0, h) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(packet_profile(0.7, h) == doctest::Approx(0.3925639504061921).epsilon(1e-10));
  CHECK(std::abs(packet_profile(1.0 / (2.0 * h), h)) < 1e-12);
  CHECK(packet_profile(1.0 / (2.0 * h) + 1e-9, h) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(packet_profile(2.3, h) == doctest::Approx(-0.030513350367398953).epsilon(1e-9));
  CHECK(packet_profile(10.1, h) == doctest::Approx(-1.6270601245953285e-06).epsilon(1e-6));
  CHECK(packet_profile_hat(0.0, h) == doctest::Approx(1.0));
  CHECK(packet_profile_hat(2.0 * h, h) == 0.0);
  CHECK(packet_profile_hat(-2.5 * h, h) == 0.0);
}

TEST_CASE("packet geometry at R = 256") {
  const StrichartzParams params;
  const WavePacket w = make_wave_packet(0.3, ConeSide::forward, Vec3{}, 1.0, params);
  // Per-axis tail energies 9.115e-6, 2.99e-8, 6.29e-7 from independent quadrature.
  CHECK(w.energy_outside_tube() == doctest::Approx(9.774404604590003e-06).epsilon(1e-3));
  CHECK(w.tube.half_widths[2] == doctest::Approx(384.0));
  CHECK(std::abs(dot(w.tube.axes[2], SphereCurve::model().eval(0.3 + kPi))) > 1.0 - 1e-12);

  WavePacket wide = w;
  wide.tube.half_widths = {1e4, 1e4, 1e6};
  CHECK(wide.energy_outside_tube() < 1e-9);
  WavePacket scaled = w;
  scaled.amplitude = {0.0, 3.0};
  CHECK(scaled.l2_norm() == doctest::Approx(3.0 * w.l2_norm()).epsilon(1e-12));
}

TEST_CASE("separating-axis test agrees with sampling") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> hw(0.1, 2.0);
  int meets = 0;
  for (int trial = 0; trial < 300; ++trial) {
    OrientedBox box;
    box.center = Vec3{3 * u(rng), 3 * u(rng), 3 * u(rng)};
    const Vec3 a = normalized(Vec3{u(rng), u(rng), u(rng)});
    const Vec3 b = normalized(cross(a, Vec3{u(rng), u(rng), u(rng)}));
    box.axes = {a, b, cross(a, b)};
    box.half_widths = {hw(rng), hw(rng), hw(rng)};
    const bool sat = box_meets_cube(box, Vec3{}, 2.0);
    bool sampled = false;
    for (int i = 0; i <= 20 && !sampled; ++i) {
      for (int j = 0; j <= 20 && !sampled; ++j) {
        for (int k = 0; k <= 20 && !sampled; ++k) {
          Vec3 p = box.center;
          p += ((i / 10.0 - 1.0) * box.half_widths[0]) * box.axes[0];
          p += ((j / 10.0 - 1.0) * box.half_widths[1]) * box.axes[1];
          p += ((k / 10.0 - 1.0) * box.half_widths[2]) * box.axes[2];
          sampled = std::abs(p.x) <= 1 && std::abs(p.y) <= 1 && std::abs(p.z) <= 1;
        }
      }
    }
    if (sampled) CHECK(sat);
    meets += sat ? 1 : 0;
  }
  CHECK(meets > 30);
  CHECK(meets < 290);
  OrientedBox axis_aligned;
  axis_aligned.axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  axis_aligned.half_widths = {1, 1, 1};
  axis_aligned.center = {2.9, 0, 0};
  CHECK(box_meets_cube(axis_aligned, Vec3{}, 4.0));
  axis_aligned.center = {3.1, 0, 0};
  CHECK_FALSE(box_meets_cube(axis_aligned, Vec3{}, 4.0));
}

TEST_CASE("single packet Strichartz experiment") {
  StrichartzParams params;
  params.R = 64;
  const PacketEnsemble ens =
      make_ensemble({make_wave_packet(1.0, ConeSide::forward, Vec3{}, 1.0, params)}, params);
  CHECK(ens.incidence == 1);
  CHECK(ens.cube_side == doctest::Approx(8.0));
  CHECK(!ens.cube_centers.empty());
  const StrichartzResult r = strichartz_experiment(ens);
  CHECK(std::isfinite(r.ratio));
  CHECK(r.ratio > 0.0);
  CHECK(r.tubes == 1);

  PacketEnsemble louder = ens;
  louder.packets[0].amplitude = std::polar(5.5, 0.7);
  CHECK(strichartz_experiment(louder).ratio == doctest::Approx(r.ratio).epsilon(1e-12));
}

TEST_CASE("cubes away from every tube see only tails") {
  StrichartzParams params;
  const WavePacket w = make_wave_packet(0.4, ConeSide::forward, Vec3{}, 1.0, params);
  PacketEnsemble ens = make_ensemble({w}, params);
  ens.cube_centers = {220.0 * w.tube.axes[1]};
  CHECK_FALSE(box_meets_cube(w.tube, ens.cube_centers[0], ens.cube_side));
  const StrichartzResult r = strichartz_experiment(ens);
  CHECK(r.lhs < 1e-6 * r.rhs);
}

TEST_CASE("bush ensembles") {
  StrichartzParams params;
  params.R = 64;
  std::vector<double> ratios;
  for (std::uint64_t seed : {1, 2, 3}) {
    const PacketEnsemble ens = bush_ensemble(16, seed, params);
    CHECK(ens.packets.size() == 16);
    CHECK(ens.incidence <= 16);
    CHECK(ens.incidence >= 8);
    ratios.push_back(strichartz_experiment(ens).ratio);
  }
  const double mean = (ratios[0] + ratios[1] + ratios[2]) / 3.0;
  for (double r : ratios) CHECK(std::abs(r / mean - 1.0) < 0.2);
  CHECK_THROWS_AS(bush_ensemble(100, 1, params), PreconditionError);
}

TEST_CASE("Strichartz preconditions name the failed clause") {
  StrichartzParams params;
  params.R = 64;
  PacketEnsemble ens = bush_ensemble(4, 5, params);
  PacketEnsemble uneven = ens;
  uneven.packets[1].amplitude *= 2.5;
  CHECK_THROWS_WITH_AS(strichartz_experiment(uneven), doctest::Contains("factor 2"), PreconditionError);
  PacketEnsemble thin = ens;
  thin.packets[0].tube.half_widths[0] = 2.0;
  CHECK_THROWS_WITH_AS(strichartz_experiment(thin), doctest::Contains("essentially supported"),
                       PreconditionError);
  PacketEnsemble crowded = ens;
  crowded.incidence = 1;
  CHECK_THROWS_WITH_AS(strichartz_experiment(crowded), doctest::Contains("more than M"),
                       PreconditionError);
  CHECK_THROWS_AS(strichartz_experiment(ens, 8.0), DomainError);
}

TEST_CASE("Lorentz rescaling") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double R : {std::exp2(8), std::exp2(12), std::exp2(16)}) {
    const auto caps = standard_caps_at_scale(std::pow(R, 0.25));
    for (const StandardCap& tau : {caps.front(), caps.back()}) {
      const LorentzRescaling L(tau, R);
      CHECK(L.determinant() == doctest::Approx(std::pow(R, 0.75)).epsilon(1e-9));
      CHECK(norm(L.apply(L.flat_direction()) - L.flat_direction()) < 1e-12);
      for (int i = 0; i < 1000; ++i) {
        const Vec3 p{u(rng), u(rng), u(rng)};
        CHECK(norm(L.inverse(L.apply(p)) - p) < 1e-10);
      }
      // L(τ) has half-widths (1, 1/2, 3/2).
      const std::array<double, 3> image_hw{1.0, 0.5, 1.5};
      for (int a = 0; a < 3; ++a) {
        const Vec3 edge = L.apply(tau.box.half_widths[a] * tau.box.axes[a]);
        CHECK(norm(edge) == doctest::Approx(image_hw[a]).epsilon(1e-12));
      }
      const double offset_max = std::pow(R, -0.25);
      for (double offset : {0.0, offset_max, -offset_max}) {
        const LorentzReport rep = L.report(0.01, offset);
        CHECK(rep.dual_box.within_factor4);
        CHECK(rep.sub_tube.within_factor4);
      }
      // Plane waves at ξ become plane waves at Lξ.
      const Vec3 xi{0.3, -0.2, 0.5};
      const auto g = L.rescale([xi](Vec3 x) { return std::polar(1.0, kTwoPi * dot(xi, x)); });
      const Vec3 y{u(rng), u(rng), u(rng)};
      const cplx expected = std::sqrt(L.determinant()) * std::polar(1.0, kTwoPi * dot(L.apply(xi), y));
      CHECK(std::abs(g(y) - expected) < 1e-9 * std::abs(expected));
    }
  }
  CHECK_THROWS_AS(LorentzRescaling(standard_caps(16).front(), std::exp2(8)), PreconditionError);
}
