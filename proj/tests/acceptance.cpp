// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli/baselines.hpp"
#include "projlab/cone_decomp.hpp"
#include "projlab/errors.hpp"
#include "projlab/geometry.hpp"
#include "projlab/grid.hpp"
#include "projlab/highdim.hpp"
#include "projlab/measures.hpp"
#include "projlab/projections.hpp"
#include "projlab/restriction.hpp"

using namespace projlab;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  // Records a check; the first failing check names itself in the detail line.
  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "failed: " << what << "; ";
      pass = false;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------- 1. identities

// Distance to the double cone {λγ(θ)}: |p|² minus the largest squared projection onto a
// generator line, maximized by a dense θ scan refined with golden-section steps.
double brute_cone_distance(Vec3 p) {
  const SphereCurve curve = SphereCurve::model();
  const auto proj = [&](double t) {
    const double d = dot(p, curve.eval(t));
    return d * d;
  };
  const int n = 4096;
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (proj(kTwoPi * i / n) > proj(kTwoPi * best / n)) best = i;
  }
  double a = kTwoPi * (best - 1) / n;
  double b = kTwoPi * (best + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    (proj(c) > proj(d) ? b : a) = (proj(c) > proj(d) ? d : c);
  }
  return std::sqrt(std::max(0.0, dot(p, p) - proj(0.5 * (a + b))));
}

void identity_suite(Verdict& v) {
  const SphereCurve model = SphereCurve::model();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double jac_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double eta1 = 5.0 * u(rng), eta2 = 5.0 * u(rng), theta = kPi * (1.0 + u(rng));
    jac_err = std::max(jac_err, std::abs(triple_product_jacobian(model, eta1, eta2, theta) + eta1 / 4.0));
  }
  v.require(jac_err <= 1e-9, "triple-product jacobian");

  double dist_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{2.0 * u(rng), 2.0 * u(rng), 2.0 * u(rng)};
    dist_err = std::max(dist_err, std::abs(cone_distance(p) - brute_cone_distance(p)));
  }
  v.require(dist_err <= 1e-6, "cone distance");

  double polar_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r = 0.1 + 2.0 * (1.0 + u(rng)), t = 0.95 * std::abs(u(rng));
    const double h = 1e-6;
    const auto map = [](double rr, double tt) { return polar_change(rr, tt); };
    const double d_eta1_dr = (map(r + h, t).eta1 - map(r - h, t).eta1) / (2 * h);
    const double d_eta2_dr = (map(r + h, t).eta2 - map(r - h, t).eta2) / (2 * h);
    const double d_eta1_dt = (map(r, t + h).eta1 - map(r, t - h).eta1) / (2 * h);
    const double d_eta2_dt = (map(r, t + h).eta2 - map(r, t - h).eta2) / (2 * h);
    const double fd = std::abs(d_eta1_dr * d_eta2_dt - d_eta1_dt * d_eta2_dr);
    const double exact = map(r, t).jacobian;
    polar_err = std::max(polar_err, std::abs(fd - exact) / exact);
  }
  v.require(polar_err <= 1e-6, "polar jacobian");

  double frame_err = 0.0;
  const auto ortho = [&](Vec3 a, Vec3 b, Vec3 c) {
    for (double x : {dot(a, a) - 1.0, dot(b, b) - 1.0, dot(c, c) - 1.0, dot(a, b), dot(a, c), dot(b, c)}) {
      frame_err = std::max(frame_err, std::abs(x));
    }
  };
  for (int i = 0; i < 1000; ++i) {
    const double theta = kPi * (1.0 + u(rng));
    const PlaneFrame f = curve_eval(model, theta).frame;
    ortho(f.e1, f.e2, f.normal);
    for (ConeSide side : {ConeSide::forward, ConeSide::backward}) {
      const auto axes = cone_frame(theta, side);
      ortho(axes[0], axes[1], axes[2]);
    }
  }
  v.require(frame_err <= 1e-12, "frame orthonormality");

  double lorentz_err = 0.0;
  for (double R : {std::exp2(8), std::exp2(12), std::exp2(16), std::exp2(20)}) {
    for (const StandardCap& tau : standard_caps_at_scale(std::pow(R, 0.25))) {
      const LorentzRescaling L(tau, R);
      const Vec3 c0 = L.apply({1, 0, 0}), c1 = L.apply({0, 1, 0}), c2 = L.apply({0, 0, 1});
      const double numeric = std::abs(dot(c0, cross(c1, c2)));
      const double expected = std::pow(R, 0.75);
      lorentz_err = std::max({lorentz_err, std::abs(L.determinant() - expected) / expected,
                              std::abs(numeric - expected) / expected});
    }
  }
  v.require(lorentz_err <= 1e-9, "Lorentz determinant");

  v.detail << "jacobian " << fmt(jac_err) << ", cone distance " << fmt(dist_err) << ", polar " << fmt(polar_err)
           << ", frames " << fmt(frame_err) << ", Lorentz " << fmt(lorentz_err);
}

// ---------------------------------------------------------------- 2. measures

void measure_suite(Verdict& v) {
  const GridSpec grid{64, 2.0};
  const AtomicMeasure ifs = ifs_generate(cube_corner_ifs(2.0, 5), 5);

  const SphereCurve model = SphereCurve::model();
  const PlaneFrame frame = curve_eval(model, 0.7).frame;
  const AtomicMeasure pushed = pushforward_map(ifs, 2, [&](std::span<const double> in, std::span<double> out) {
    const Vec3 x{in[0], in[1], in[2]};
    out[0] = dot(x, frame.e1);
    out[1] = dot(x, frame.e2);
  });
  v.require(pushed.total_mass() == ifs.total_mass(), "pushforward mass");

  double mollify_err = 0.0;
  for (int j = 1; j <= 3; ++j) {
    mollify_err = std::max(mollify_err, std::abs(mollify(ifs, j, grid).integral_real() - ifs.total_mass()));
  }
  v.require(mollify_err <= 1e-6, "mollify mass");

  // Sampled Riesz energies against calibrated Fourier energies of Gaussian densities.
  struct Case {
    double sigma, s;
  };
  double energy_err = 0.0;
  std::mt19937_64 rng(21);
  for (const Case c : {Case{0.15, 0.5}, Case{0.2, 1.0}, Case{0.25, 1.5}, Case{0.2, 2.0}, Case{0.3, 1.0}}) {
    std::normal_distribution<double> nd(0.0, c.sigma);
    std::vector<Vec3> pts(6000);
    for (auto& p : pts) p = {nd(rng), nd(rng), nd(rng)};
    const double riesz = riesz_energy(AtomicMeasure::uniform(pts), c.s).value;
    const double fourier = energy_calibration(c.s, grid).constant * fourier_energy(gaussian_density(grid, c.sigma), c.s);
    energy_err = std::max(energy_err, std::abs(riesz - fourier) / riesz);
  }
  v.require(energy_err < 0.1, "Riesz vs Fourier energy");

  bool monotone = true;
  const std::vector<double> alphas{0.5, 1.0, 1.5, 2.0, 2.5};
  const auto coarse = dyadic_radii(0, 4);
  const auto fine = dyadic_radii(0, 8);
  for (double dim : {1.5, 2.0, 2.5}) {
    const AtomicMeasure mu = ifs_generate(cube_corner_ifs(dim, 3), 4);
    const auto on_fine = frostman_constants(mu, alphas, fine);
    const auto on_coarse = frostman_constants(mu, alphas, coarse);
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      if (a > 0 && on_fine[a] < on_fine[a - 1]) monotone = false;
      if (on_fine[a] < on_coarse[a]) monotone = false;
    }
  }
  v.require(monotone, "Frostman monotonicity");

  v.detail << "pushforward exact, mollify " << fmt(mollify_err) << ", energy rel " << fmt(energy_err)
           << ", Frostman monotone " << (monotone ? "yes" : "no");
}

// ---------------------------------------------------------------- 3. wave packets

void wave_packet_suite(Verdict& v) {
  const GridSpec grid{128, 0.5};
  const PacketParams params;
  std::vector<double> coords;
  const AtomicMeasure base = ifs_generate(cube_corner_ifs(2.0, 7), 5);
  for (double c : base.coords()) coords.push_back(0.3 * c);
  const AtomicMeasure mu_atoms(3, coords, base.weights());
  const GridField mu = mollify(mu_atoms, 4, grid);

  const PacketCover cover(grid, params);
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> pick(0, cover.caps().size() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double partition_err = 0.0;
  for (int s = 0; s < 2000; ++s) {
    const Cap& cap = cover.caps()[pick(rng)];
    Vec3 xi = cap.box.center;
    for (int a = 0; a < 3; ++a) xi += (u(rng) * cap.box.half_widths[a]) * cap.box.axes[a];
    partition_err = std::max(partition_err, std::abs(cover.partition_sum(xi) - 1.0));
  }
  v.require(partition_err <= 1e-6, "partition of unity");

  // The additive 2^{-4k} term is sized for probability measures, so the L1 constant is
  // audited at unit mass. Reconstruction uses mass 100, which makes tubes bad.
  double constant = 0.0;
  for (const auto& row : decompose_good_bad(mu, params).ledger) constant = std::max(constant, row.packet_constant);
  v.require(constant <= 10.0, "packet L1 constant");

  GridField heavy = mu;
  heavy *= 100.0;
  const GoodBadDecomposition d = decompose_good_bad(heavy, params, GoodBadOptions{.audit_packets = false});
  GridField sum = d.mu_g;
  sum += d.mu_b;
  sum -= heavy;
  const double recon = sum.l2_norm() / heavy.l2_norm();
  v.require(recon <= 1e-10, "good + bad reconstruction");
  std::size_t bad = 0;
  for (const auto& row : d.ledger) bad += row.bad_count;
  v.require(bad > 0, "bad tubes present at mass 100");

  // Leakage beyond 4τ for the heaviest tube of the first cap at each level.
  std::vector<Vec3> points;
  for (std::size_t i = 0; i < mu_atoms.size(); ++i) points.push_back(mu_atoms.vec3(i));
  double leakage = 0.0;
  std::size_t audited = 0;
  for (const Cap& cap : cover.caps()) {
    if (cap.index != 0 || cap.side != ConeSide::forward || cap.layer < 0) continue;
    const auto tubes = build_tubes(cap, params.delta);
    const TubeMassCounter counter(cap.box.axes, tube_half_widths(cap.j, cap.k, params.delta), points,
                                  mu_atoms.weights());
    const Tube* heaviest = &tubes.front();
    for (const Tube& t : tubes) {
      if (counter.mass(t.lattice, 2) > counter.mass(heaviest->lattice, 2)) heaviest = &t;
    }
    leakage = std::max(leakage, packet_leakage(cover.apply_wave_packet(mu, cap, *heaviest), cap, 4.0));
    ++audited;
  }
  v.require(leakage < 1e-6, "out-of-cap leakage below 1e-6");

  v.detail << "partition " << fmt(partition_err) << ", reconstruction " << fmt(recon) << " (" << bad
           << " bad tubes at mass 100), C " << fmt(constant) << " at unit mass" << ", leakage beyond 4tau " << fmt(leakage) << " over " << audited
           << " packets";
}

// ---------------------------------------------------------------- 4. nonstationary phase

void nonstationary_suite(Verdict& v) {
  const PacketParams params;
  const GridSpec grid{128, 0.5};
  std::vector<std::string> notes;
  std::vector<double> ratios;
  for (int k : {4, 6, 8}) {
    const double gap = nonstationary_required_gap(k, params.delta);
    if (gap > kPi) {
      v.require(false, "admissible angle at k = " + std::to_string(k));
      notes.push_back("k=" + std::to_string(k) + " needs gap " + fmt(gap) + " > pi");
      continue;
    }
    const int j_max = resolvable_j_max(grid);
    if (k > j_max) {
      v.require(false, "grid resolves caps at k = " + std::to_string(k));
      notes.push_back("k=" + std::to_string(k) + " beyond j_max " + std::to_string(j_max));
      continue;
    }
    const PacketCover cover(grid, params);
    const Cap* cap = nullptr;
    for (const Cap& c : cover.caps()) {
      if (c.k == k && c.j == k) cap = &c;
    }
    const Vec3 origin{};
    const GridField f = mollify(AtomicMeasure::uniform({&origin, 1}), 4, grid);
    const Tube tube = build_tubes(*cap, params.delta).front();
    const auto r = nonstationary_check(f, cover, *cap, tube, wrap_angle(cap->star_angle + gap));
    ratios.push_back(r.observed);
  }
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    v.require(ratios[i - 1] >= 64.0 * ratios[i], "decay by 8 per unit k");
  }
  for (const auto& n : notes) v.detail << n << "; ";
}

// ---------------------------------------------------------------- 5. decay exponents

void beta_suite(Verdict& v) {
  ConicalQuadrature q;
  q.n_rho = 40;
  q.n_y = 256;
  const auto radii = dyadic_range(1, 7);
  const SphereCurve model = SphereCurve::model();

  const Vec3 dir = normalized(Vec3{-1.0, 0.0, 1.0});
  std::vector<Vec3> pts;
  for (int i = 0; i < 2048; ++i) pts.push_back((-0.5 + (i + 0.5) / 2048.0) * dir);
  const BetaEstimate segment = beta_fit(conical_average_series(AtomicMeasure::uniform(pts), model, radii, q));
  v.require(segment.beta >= 0.35, "segment beta >= 0.35");

  const Vec3 origin{};
  const BetaEstimate point = beta_fit(conical_average_series(AtomicMeasure::uniform({&origin, 1}), model, radii, q));
  v.require(point.beta <= 0.05, "point mass beta <= 0.05");

  v.detail << "segment beta " << fmt(segment.beta) << " (r2 " << fmt(segment.fit.r2) << "), point beta "
           << fmt(point.beta) << ", " << q.n_rho * q.n_y << " nodes";
}

// ---------------------------------------------------------------- 6. projection scan

void scan_suite(Verdict& v) {
  const IFSSpec spec = cube_corner_ifs(2.0, 7);
  const double dim = spec.similarity_dimension();
  v.require(std::abs(dim - 2.0) <= 0.05, "similarity dimension 2 +- 0.05");
  const AtomicMeasure mu = ifs_generate(spec, 7);
  const SphereCurve model = SphereCurve::model();
  const auto thetas = model.sample_grid(256);
  const ScanReport rep = theorem_scan(mu, model, thetas, ScanConfig{});
  const double bound = 31.0 / 18.0;
  v.require(std::abs(rep.bound - bound) < 1e-12, "scan bound 31/18");
  v.require(rep.reliable_count > 0 && rep.below_fraction < 0.1, "below fraction < 10%");
  double lo = 1e9;
  for (const ScanRow& r : rep.rows) lo = std::min(lo, r.dim_est);
  v.detail << "dim " << fmt(dim) << ", " << mu.size() << " atoms, reliable " << rep.reliable_count
           << "/256, below fraction " << fmt(rep.below_fraction) << ", min estimate " << fmt(lo);
}

// ---------------------------------------------------------------- 7. baselines

void baseline_suite(Verdict& v, const std::string& dir) {
  const auto dec = cli::read_baseline(cli::decoupling_baseline_path(dir), "decoupling");
  const auto str = cli::read_baseline(cli::strichartz_baseline_path(dir), "strichartz");
  const cli::BaselineSettings dec_settings = cli::settings_from_json(dec.at("settings"));
  const cli::BaselineSettings str_settings = cli::settings_from_json(str.at("settings"));
  v.require(dec_settings.decoupling_ensembles >= 50 && dec_settings.decoupling_p == 6.0, "decoupling settings");
  v.require(str_settings.strichartz_R == 256.0 && str_settings.strichartz_seeds >= 10, "Strichartz settings");

  double worst = 0.0;  // largest |new/baseline − 1|
  double exceed = 0.0; // largest new/baseline
  const auto compare = [&](double now, double stored) {
    worst = std::max(worst, std::abs(now / stored - 1.0));
    exceed = std::max(exceed, now / stored);
  };
  const auto dec_now = cli::compute_decoupling_baseline(dec_settings);
  const auto& entries = dec.at("entries");
  v.require(entries.size() == dec_now.at("entries").size(), "decoupling entry count");
  for (std::size_t e = 0; e < std::min(entries.size(), dec_now.at("entries").size()); ++e) {
    const auto stored = entries[e].at("ratios").get<std::vector<double>>();
    const auto now = dec_now.at("entries")[e].at("ratios").get<std::vector<double>>();
    v.require(stored.size() == now.size(), "decoupling ensemble count");
    for (std::size_t i = 0; i < std::min(stored.size(), now.size()); ++i) compare(now[i], stored[i]);
  }
  const auto str_now = cli::compute_strichartz_baseline(str_settings);
  const auto& str_entries = str.at("entries");
  v.require(str_entries.size() == str_now.at("entries").size(), "Strichartz entry count");
  for (std::size_t e = 0; e < std::min(str_entries.size(), str_now.at("entries").size()); ++e) {
    compare(str_now.at("entries")[e].at("ratio").get<double>(), str_entries[e].at("ratio").get<double>());
  }
  v.require(worst <= 0.25, "within 25% of baseline");
  v.require(exceed <= 1.25, "never above baseline x 1.25");
  v.detail << "baseline v" << dec.value("version", 0) << ", max deviation " << fmt(worst) << ", max ratio/baseline "
           << fmt(exceed);
}

// ---------------------------------------------------------------- 8. high dimensions

void highdim_suite(Verdict& v) {
  const LinearVectorField field = make_vector_field(4);
  const HemisphereChart chart(4);
  const auto samples = chart_samples(4, 0.5, 1000, 17);
  std::vector<double> lambdas;
  for (int i = -20; i <= 20; ++i) lambdas.push_back(0.25 * i);
  const RankReport rep = verify_rank_conditions(family_from_field(field, chart), samples, lambdas);
  v.require(rep.passed(), "rank conditions");
  v.require(rep.min_det_lambda > 0.0 && rep.min_det_pencil > 0.0, "min |det| > 0");

  const Eigen::VectorXd lambda = chart_samples(4, 0.5, 1, 3).front();
  const auto [x, y] = degenerate_pair(chart, lambda);
  const double degenerate = transversality_determinant(field, chart, lambda, x, y).determinant;
  v.require(std::abs(degenerate) <= 1e-10, "degenerate pair determinant");

  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss;
  double generic = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a(5), b(5);
    for (int k = 0; k < 5; ++k) {
      a(k) = gauss(rng);
      b(k) = gauss(rng);
    }
    generic = std::min(generic, transversality_determinant(field, chart, lambda, a, b).determinant);
  }
  v.require(generic > 1e-6, "generic pairs > 1e-6");

  bool odd_rejected = false;
  try {
    make_vector_field(3);
  } catch (const DomainError&) {
    odd_rejected = true;
  }
  v.require(odd_rejected, "d = 3 rejected");

  v.detail << "min det " << fmt(rep.min_det_lambda) << ", pencil " << fmt(rep.min_det_pencil) << ", degenerate "
           << fmt(degenerate) << ", generic min " << fmt(generic) << ", d=3 rejected";
}

}  // namespace

int main(int argc, char** argv) {
  const std::string baseline_dir = argc > 1 ? argv[1] : PROJLAB_BASELINE_DIR;
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Verdict&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "identity suite", 10, identity_suite},
      {2, "measure suite", 60, measure_suite},
      {3, "wave-packet suite", 300, wave_packet_suite},
      {4, "nonstationary phase", 120, nonstationary_suite},
      {5, "decay exponents", 120, beta_suite},
      {6, "projection scan", 600, scan_suite},
      {7, "inequality regressions", 600, [&](Verdict& v) { baseline_suite(v, baseline_dir); }},
      {8, "high-dimensional suite", 30, highdim_suite},
  };

  // Optional criterion ids after the baseline directory select a subset.
  std::vector<int> selected;
  for (int i = 2; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "error: " << e.what();
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed >= c.budget_s) {
      v.pass = false;
      v.detail << "; over the time budget";
    }
    if (!v.pass) ++failures;
    std::printf("%s criterion %d %s (%.1f s, budget %.0f s): %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, elapsed,
                c.budget_s, v.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
