#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "cli/baselines.hpp"
#include "projlab/cone_decomp.hpp"
#include "projlab/errors.hpp"
#include "projlab/geometry.hpp"
#include "projlab/grid.hpp"
#include "projlab/highdim.hpp"
#include "projlab/measures.hpp"
#include "projlab/projections.hpp"
#include "projlab/restriction.hpp"

namespace projlab::cli {

namespace {

using nlohmann::json;
using PT = ParamType;

std::vector<ParamSpec> with_common(std::vector<ParamSpec> specs) {
  for (auto& c : common_params()) specs.push_back(std::move(c));
  return specs;
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

// ---------------------------------------------------------------- shared inputs

std::vector<ParamSpec> measure_params(const std::string& kind, const std::string& depth) {
  return {
      {"measure", PT::text, "", "measure container to load (generated when empty)"},
      {"kind", PT::text, kind, "generated measure: cube-ifs, segment or point"},
      {"alpha", PT::real, "2.0", "dimension of the cube-corner IFS"},
      {"depth", PT::integer, depth, "IFS depth"},
      {"atoms", PT::integer, "2048", "segment atoms"},
      {"scale", PT::real, "1.0", "dilation applied to the measure"},
  };
}

AtomicMeasure load_measure(const Params& p) {
  AtomicMeasure mu;
  if (!p.text("measure").empty()) {
    mu = read_measure(p.text("measure"));
  } else if (p.text("kind") == "cube-ifs") {
    mu = ifs_generate(cube_corner_ifs(p.real("alpha"), p.seed()), static_cast<int>(p.integer("depth")));
  } else if (p.text("kind") == "segment") {
    const long atoms = p.integer("atoms");
    if (atoms < 1) throw PreconditionError("segment needs at least one atom");
    // Along γ(0) × γ′(0) of the model curve.
    const Vec3 dir = normalized(Vec3{-1.0, 0.0, 1.0});
    std::vector<Vec3> points;
    for (long i = 0; i < atoms; ++i) points.push_back((-0.5 + (i + 0.5) / atoms) * dir);
    mu = AtomicMeasure::uniform(points);
  } else if (p.text("kind") == "point") {
    const Vec3 origin{};
    mu = AtomicMeasure::uniform({&origin, 1});
  } else {
    throw PreconditionError("unknown measure kind '" + p.text("kind") + "'");
  }
  if (p.real("scale") == 1.0) return mu;
  std::vector<double> coords = mu.coords();
  for (double& c : coords) c *= p.real("scale");
  return AtomicMeasure(mu.dim(), std::move(coords), mu.weights());
}

SphereCurve parse_curve(const std::string& name) {
  if (name == "model") return SphereCurve::model();
  if (name == "great") return SphereCurve::great_circle();
  if (name.rfind("small:", 0) == 0) {
    const ParamSpec spec{"curve", PT::real, "", ""};
    return SphereCurve::small_circle(std::get<double>(parse_value(spec, name.substr(6))));
  }
  throw PreconditionError("unknown curve '" + name + "' (model, great or small:<height>)");
}

std::vector<ParamSpec> grid_params() {
  return {
      {"n", PT::integer, "64", "grid points per axis"},
      {"half_width", PT::real, "0.5", "spatial half-width L of the grid"},
      {"mollify_level", PT::integer, "3", "mollifier scale 2^-j"},
      {"eps", PT::real, "0.1", "epsilon of the cap levels"},
      {"delta", PT::real, "0.005", "tube exponent delta"},
      {"J", PT::integer, "1", "coarsest cap level"},
  };
}

GridSpec grid_spec(const Params& p) {
  GridSpec grid{static_cast<std::size_t>(std::max(0L, p.integer("n"))), p.real("half_width")};
  grid.validate();
  return grid;
}

PacketParams packet_params(const Params& p) {
  PacketParams pp;
  pp.eps = p.real("eps");
  pp.delta = p.real("delta");
  pp.J = static_cast<int>(p.integer("J"));
  pp.alpha = p.real("alpha");
  pp.validate();
  return pp;
}

const Cap& find_cap(const PacketCover& cover, int j, int k) {
  for (const Cap& c : cover.caps()) {
    if (c.j == j && c.k == k) return c;
  }
  throw PreconditionError("no cap at (j, k) = (" + std::to_string(j) + ", " + std::to_string(k) +
                          ") on this grid (j_max = " + std::to_string(cover.j_max()) + ")");
}

std::vector<ParamSpec> scan_params() {
  return {
      {"thetas", PT::integer, "256", "number of projection angles"},
      {"tolerance", PT::real, "0.15", "below-bound tolerance"},
      {"r2_threshold", PT::real, "0.9", "minimum r² of a reliable fit"},
  };
}

ScanConfig scan_config(const Params& p) {
  ScanConfig config;
  config.alpha = p.real("alpha");
  config.tolerance = p.real("tolerance");
  config.r2_threshold = p.real("r2_threshold");
  return config;
}

const char* bound_kind_name(BoundKind kind) {
  switch (kind) {
    case BoundKind::model_curve: return "model_curve";
    case BoundKind::curved_family: return "curved_family";
    case BoundKind::positive_area: return "positive_area";
  }
  return "unknown";
}

Outcome scan_outcome(const ScanReport& rep) {
  Outcome out;
  out.result = {{"curve", rep.curve},
                {"bound_kind", bound_kind_name(rep.bound_kind)},
                {"bound", rep.bound},
                {"thetas", rep.rows.size()},
                {"reliable_count", rep.reliable_count},
                {"below_fraction", rep.below_fraction}};
  out.table.header = {"theta", "dim_est", "r2", "bound", "covered_area", "reliable", "below"};
  for (const ScanRow& r : rep.rows) {
    out.table.rows.push_back({r.theta, r.dim_est, r.r2, r.bound, r.covered_area, double(r.reliable), double(r.below)});
  }
  return out;
}

Outcome run_theorem_scan(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  const SphereCurve curve = parse_curve(p.text("curve"));
  const long count = p.integer("thetas");
  if (count < 1) throw PreconditionError("thetas must be positive");
  const auto thetas = curve.sample_grid(static_cast<std::size_t>(count));
  Outcome out = scan_outcome(theorem_scan(mu, curve, thetas, scan_config(p)));
  out.result["atoms"] = mu.size();
  return out;
}

// ---------------------------------------------------------------- commands

Outcome gen_measure(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  const std::string& path = p.text("output");
  if (path.empty()) throw PreconditionError("gen-measure needs --output");
  json sidecar = {{"kind", p.text("kind")}, {"seed", p.seed()}, {"atoms", mu.size()}};
  if (p.text("kind") == "cube-ifs") {
    sidecar["alpha"] = p.real("alpha");
    sidecar["depth"] = p.integer("depth");
  }
  write_measure(path, mu, sidecar.dump());
  Outcome out;
  out.result = {{"path", path},
                {"atoms", mu.size()},
                {"dim", mu.dim()},
                {"total_mass", mu.total_mass()},
                {"support_radius", mu.support_radius()}};
  if (p.text("kind") == "cube-ifs") {
    out.result["similarity_dimension"] = cube_corner_ifs(p.real("alpha"), p.seed()).similarity_dimension();
  }
  out.table.header = {"x", "y", "z", "weight"};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec3 v = mu.vec3(i);
    out.table.rows.push_back({v.x, v.y, v.z, mu.weight(i)});
  }
  return out;
}

Outcome project(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  const ProjectedMeasure2D proj = project_measure(mu, parse_curve(p.text("curve")), p.real("theta"));
  Outcome out;
  out.result = {{"theta", proj.theta},
                {"atoms", proj.size()},
                {"total_mass", proj.total_mass},
                {"e1", vec_json(proj.frame.e1)},
                {"e2", vec_json(proj.frame.e2)},
                {"direction", vec_json(proj.frame.normal)}};
  out.table.header = {"u", "v", "weight"};
  for (std::size_t i = 0; i < proj.size(); ++i) {
    out.table.rows.push_back({proj.coords[2 * i], proj.coords[2 * i + 1], proj.weights[i]});
  }
  return out;
}

Outcome boxdim(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  BoxCountOptions opts;
  opts.max_level = static_cast<int>(p.integer("max_level"));
  const DecayFit fit = p.flag("project")
                           ? box_dimension(project_measure(mu, parse_curve(p.text("curve")), p.real("theta")), opts)
                           : box_dimension(mu, opts);
  Outcome out;
  out.result = {{"dimension", fit.slope},      {"r2", fit.r2},
                {"window_lo", fit.window_lo},  {"window_hi", fit.window_hi},
                {"degenerate", fit.degenerate}, {"projected", p.flag("project")}};
  out.table.header = {"inverse_box_size", "count"};
  for (std::size_t i = 0; i < fit.scales.size(); ++i) out.table.rows.push_back({fit.scales[i], fit.values[i]});
  return out;
}

Outcome energy(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  const bool projected = p.flag("project");
  const double top = projected ? 2.0 : static_cast<double>(mu.dim());
  std::vector<double> s_grid;
  for (int i = 1; 0.05 * i < top - 1e-9; ++i) s_grid.push_back(0.05 * i);
  EnergyDimensionOptions opts;
  opts.finest_level = static_cast<int>(p.integer("finest_level"));
  const EnergyDimension ed =
      projected ? energy_dimension(project_measure(mu, parse_curve(p.text("curve")), p.real("theta")), s_grid, opts)
                : energy_dimension(mu, s_grid, opts);
  Outcome out;
  out.result = {{"s", p.real("s")},
                {"atoms", mu.size()},
                {"energy_dimension", ed.value},
                {"energy_dimension_degenerate", ed.degenerate},
                {"projected", projected}};
  // Pairwise sums are quadratic in the atom count.
  if (mu.size() <= static_cast<std::size_t>(std::max(0L, p.integer("riesz_max_atoms")))) {
    const RieszEnergy e = riesz_energy(mu, p.real("s"));
    out.result["riesz_energy"] = e.value;
    out.result["coincident_pairs"] = e.coincident_pairs;
  } else {
    out.result["riesz_energy"] = nullptr;
  }
  out.table.header = {"s", "increment_ratio"};
  for (std::size_t i = 0; i < ed.s_grid.size(); ++i) out.table.rows.push_back({ed.s_grid[i], ed.increment_ratio[i]});
  return out;
}

AverageSeries average_series(const Params& p) {
  const AtomicMeasure mu = load_measure(p);
  ConicalQuadrature q;
  q.n_rho = static_cast<std::size_t>(std::max(0L, p.integer("n_rho")));
  q.n_y = static_cast<std::size_t>(std::max(0L, p.integer("n_y")));
  const auto radii = dyadic_range(static_cast<int>(p.integer("r_lo")), static_cast<int>(p.integer("r_hi")));
  return conical_average_series(mu, parse_curve(p.text("curve")), radii, q);
}

Table series_table(const AverageSeries& s) {
  Table t;
  t.header = {"R", "average", "quadrature_error"};
  for (std::size_t i = 0; i < s.R.size(); ++i) t.rows.push_back({s.R[i], s.values[i], s.quadrature_error[i]});
  return t;
}

Outcome cone_average(const Params& p) {
  const AverageSeries s = average_series(p);
  Outcome out;
  out.result = {{"R", s.R}, {"average", s.values}, {"quadrature_error", s.quadrature_error}};
  out.table = series_table(s);
  return out;
}

Outcome beta_fit_cmd(const Params& p) {
  const AverageSeries s = average_series(p);
  const BetaEstimate b = beta_fit(s, p.real("r2_threshold"));
  Outcome out;
  out.result = {{"beta", b.beta},
                {"r2", b.fit.r2},
                {"flagged", b.flagged},
                {"reference_alpha", p.real("reference_alpha")},
                {"reference_beta", beta_reference(p.real("reference_alpha"), 2, BetaFamily::cone_curve)},
                {"R", s.R},
                {"average", s.values}};
  out.table = series_table(s);
  return out;
}

Outcome wavepacket(const Params& p) {
  const GridSpec grid = grid_spec(p);
  const PacketParams pp = packet_params(p);
  const AtomicMeasure mu = load_measure(p);
  const GridField field = mollify(mu, static_cast<int>(p.integer("mollify_level")), grid);
  const PacketCover cover(grid, pp);
  const Cap& cap = find_cap(cover, static_cast<int>(p.integer("j")), static_cast<int>(p.integer("k")));

  // Partition of unity at random points of random caps.
  std::mt19937_64 rng(p.seed());
  std::uniform_int_distribution<std::size_t> pick(0, cover.caps().size() - 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double partition_error = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const Cap& c = cover.caps()[pick(rng)];
    Vec3 xi = c.box.center;
    for (int a = 0; a < 3; ++a) xi += (u(rng) * c.box.half_widths[a]) * c.box.axes[a];
    partition_error = std::max(partition_error, std::abs(cover.partition_sum(xi) - 1.0));
  }

  std::vector<Tube> tubes = build_tubes(cap, pp.delta);
  std::vector<Vec3> points;
  for (std::size_t i = 0; i < mu.size(); ++i) points.push_back(mu.vec3(i));
  const auto hw = tube_half_widths(cap.j, cap.k, pp.delta);
  const TubeMassCounter counter(cap.box.axes, hw, points, mu.weights());
  std::vector<double> mass2(tubes.size());
  for (std::size_t i = 0; i < tubes.size(); ++i) mass2[i] = counter.mass(tubes[i].lattice, 2);
  std::vector<std::size_t> order(tubes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mass2[a] > mass2[b]; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(0L, p.integer("packets")))));

  Outcome out;
  out.table.header = {"l0", "l1", "l2", "mass_2T", "packet_l1", "constant", "leakage_4tau"};
  double max_constant = 0.0;
  double max_leakage = 0.0;
  for (std::size_t idx : order) {
    const Tube& t = tubes[idx];
    const GridField packet = cover.apply_wave_packet(field, cap, t);
    const double l1 = packet.l1_norm();
    const double constant = l1 / (mass2[idx] + std::exp2(-4.0 * cap.k));
    const double leak = packet_leakage(packet, cap, 4.0);
    max_constant = std::max(max_constant, constant);
    max_leakage = std::max(max_leakage, leak);
    out.table.rows.push_back({double(t.lattice[0]), double(t.lattice[1]), double(t.lattice[2]), mass2[idx], l1,
                              constant, leak});
  }
  out.result = {{"caps", cover.caps().size()},
                {"j_max", cover.j_max()},
                {"cap_angle", cap.angle},
                {"tubes", tubes.size()},
                {"tube_half_widths", hw},
                {"partition_error", partition_error},
                {"packets", order.size()},
                {"max_constant", max_constant},
                {"max_leakage_4tau", max_leakage}};
  return out;
}

Outcome goodbad(const Params& p) {
  const GridSpec grid = grid_spec(p);
  const PacketParams pp = packet_params(p);
  GridField mu = mollify(load_measure(p), static_cast<int>(p.integer("mollify_level")), grid);
  mu *= p.real("mass");
  const GoodBadDecomposition d = decompose_good_bad(mu, pp);
  GridField diff = d.mu_g;
  diff += d.mu_b;
  diff -= mu;
  Outcome out;
  out.table.header = {"j", "k", "caps", "tubes", "bad_count", "bad_mass", "threshold", "packet_constant"};
  std::size_t bad = 0;
  double max_constant = 0.0;
  for (const auto& r : d.ledger) {
    bad += r.bad_count;
    max_constant = std::max(max_constant, r.packet_constant);
    out.table.rows.push_back({double(r.j), double(r.k), double(r.caps), double(r.tubes), double(r.bad_count),
                              r.bad_mass, r.threshold, r.packet_constant});
  }
  out.result = {{"levels", d.ledger.size()},
                {"bad_tubes", bad},
                {"bad_l2", d.mu_b.l2_norm()},
                {"reconstruction_error", diff.l2_norm() / std::max(mu.l2_norm(), 1e-300)},
                {"max_packet_constant", max_constant}};
  return out;
}

Outcome nonstat_check(const Params& p) {
  const GridSpec grid = grid_spec(p);
  const PacketParams pp = packet_params(p);
  const GridField f = mollify(load_measure(p), static_cast<int>(p.integer("mollify_level")), grid);
  const PacketCover cover(grid, pp);
  const Cap& cap = find_cap(cover, static_cast<int>(p.integer("j")), static_cast<int>(p.integer("k")));
  const auto tubes = build_tubes(cap, pp.delta);
  const Tube* tube = &tubes.front();
  for (const Tube& t : tubes) {
    if (t.lattice == std::array<long, 3>{0, 0, 0}) tube = &t;
  }
  NonstationaryOptions opts;
  opts.angle_constant = p.real("angle_constant");
  opts.decay_order = static_cast<int>(p.integer("decay_order"));
  const double theta = wrap_angle(cap.star_angle + p.real("theta_offset"));
  const NonstationaryResult r = nonstationary_check(f, cover, cap, *tube, theta, opts);
  Outcome out;
  out.result = {{"theta", theta},         {"observed", r.observed},    {"reference", r.reference},
                {"ratio", r.ratio},       {"angle_gap", r.angle_gap},  {"required_gap", r.required_gap}};
  return out;
}

Outcome decoupling_test(const Params& p) {
  const DecouplingEnsemble e =
      decoupling_ensemble(static_cast<int>(p.integer("K")), p.real("p"),
                          static_cast<std::size_t>(std::max(0L, p.integer("ensembles"))), p.seed(),
                          static_cast<int>(p.integer("per_cap")));
  Outcome out;
  out.result = {{"K", e.K}, {"p", e.p}, {"max_ratio", e.max_ratio}, {"mean_ratio", e.mean_ratio}, {"ratios", e.ratios}};
  out.table.header = {"seed", "ratio"};
  for (std::size_t i = 0; i < e.ratios.size(); ++i) out.table.rows.push_back({double(e.seeds[i]), e.ratios[i]});
  return out;
}

Outcome strichartz_test(const Params& p) {
  StrichartzParams sp;
  sp.R = p.real("R");
  sp.delta = p.real("delta");
  sp.quadrature = static_cast<int>(p.integer("quadrature"));
  const long seeds = p.integer("seeds");
  if (seeds < 1) throw PreconditionError("seeds must be positive");
  Outcome out;
  out.table.header = {"seed", "ratio", "lhs", "rhs", "incidence", "cubes"};
  std::vector<double> ratios;
  for (long i = 0; i < seeds; ++i) {
    const std::uint64_t seed = p.seed() + static_cast<std::uint64_t>(i);
    const PacketEnsemble ens = bush_ensemble(static_cast<std::size_t>(std::max(0L, p.integer("tubes"))), seed, sp);
    const StrichartzResult r = strichartz_experiment(ens, p.real("p"));
    ratios.push_back(r.ratio);
    out.table.rows.push_back({double(seed), r.ratio, r.lhs, r.rhs, double(r.incidence), double(r.cubes)});
  }
  out.result = {{"R", sp.R},
                {"ratios", ratios},
                {"max_ratio", *std::max_element(ratios.begin(), ratios.end())},
                {"mean_ratio", std::accumulate(ratios.begin(), ratios.end(), 0.0) / ratios.size()}};
  return out;
}

Outcome jacobian_check(const Params& p) {
  const double eta1 = p.real("eta1");
  const double value = triple_product_jacobian(SphereCurve::model(), eta1, p.real("eta2"), p.real("theta"));
  const double expected = -eta1 / 4.0;
  Outcome out;
  out.result = {{"value", value},
                {"expected", expected},
                {"error", std::abs(value - expected)},
                {"pass", std::abs(value - expected) <= 1e-9 * std::max(1.0, std::abs(expected))}};
  return out;
}

Outcome cone_distance_cmd(const Params& p) {
  const Vec3 x{p.real("x"), p.real("y"), p.real("z")};
  Outcome out;
  out.result = {{"point", vec_json(x)}, {"distance", cone_distance(x)}, {"search_distance", cone_distance_search(x)}};
  return out;
}

Outcome rank_check(const Params& p) {
  const int d = static_cast<int>(p.integer("d"));
  RankCheckOptions opts;
  opts.tolerance = p.real("tolerance");
  opts.mu_min = p.real("mu_min");
  std::vector<double> lambdas;
  const long steps = p.integer("lambda_steps");
  for (long i = 0; i < steps; ++i) {
    lambdas.push_back(steps == 1 ? 0.0 : p.real("lambda_max") * (-1.0 + 2.0 * i / double(steps - 1)));
  }
  const std::size_t count = static_cast<std::size_t>(std::max(0L, p.integer("samples")));
  FamilyFG fam;
  std::vector<Eigen::VectorXd> samples;
  if (d == 2) {
    const SphereCurve curve = parse_curve(p.text("curve"));
    fam = family_from_curve(curve);
    for (double t : curve.sample_grid(count)) samples.push_back(Eigen::VectorXd::Constant(1, t));
  } else {
    fam = family_from_field(make_vector_field(d), HemisphereChart(d, p.real("radius")));
    samples = chart_samples(d, p.real("radius"), count, p.seed());
  }
  const RankReport r = verify_rank_conditions(fam, samples, lambdas, opts);
  Outcome out;
  out.result = {{"d", r.d},
                {"family", fam.descriptor},
                {"samples", r.samples},
                {"passed", r.passed()},
                {"rank_G_DF", r.rank_G_DF},
                {"rank_F_DG", r.rank_F_DG},
                {"rank_DG", r.rank_DG},
                {"determinant", r.determinant},
                {"min_sv_G_DF", r.min_sv_G_DF},
                {"min_sv_F_DG", r.min_sv_F_DG},
                {"max_extra_sv_F_DG", r.max_extra_sv_F_DG},
                {"min_sv_DG", r.min_sv_DG},
                {"min_det_lambda", r.min_det_lambda},
                {"min_det_pencil", r.min_det_pencil},
                {"min_det_lambda_zero", r.min_det_lambda_zero},
                {"offending", r.offending}};
  return out;
}

Outcome transversality_check(const Params& p) {
  const int d = static_cast<int>(p.integer("d"));
  const LinearVectorField field = make_vector_field(d);
  const HemisphereChart chart(d, p.real("radius"));
  const Eigen::VectorXd lambda = chart_samples(d, p.real("radius"), 1, p.seed()).front();
  const auto [x, y] = degenerate_pair(chart, lambda);
  const TransversalityValue degenerate = transversality_determinant(field, chart, lambda, x, y);

  std::mt19937_64 rng(p.seed() + 1);
  std::normal_distribution<double> gauss;
  Outcome out;
  out.table.header = {"pair", "determinant"};
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  bool nonnegative = degenerate.determinant >= 0.0;
  const long pairs = p.integer("pairs");
  for (long i = 0; i < pairs; ++i) {
    Eigen::VectorXd a(d + 1), b(d + 1);
    for (int k = 0; k <= d; ++k) {
      a(k) = gauss(rng);
      b(k) = gauss(rng);
    }
    const double det = transversality_determinant(field, chart, lambda, a, b).determinant;
    nonnegative = nonnegative && det >= 0.0;
    lo = std::min(lo, det);
    hi = std::max(hi, det);
    out.table.rows.push_back({double(i), det});
  }
  out.result = {{"d", d},
                {"lambda", std::vector<double>(lambda.data(), lambda.data() + lambda.size())},
                {"degenerate_determinant", degenerate.determinant},
                {"degenerate_pi", {degenerate.pi(0), degenerate.pi(1)}},
                {"generic_pairs", pairs},
                {"generic_min", pairs > 0 ? lo : 0.0},
                {"generic_max", hi},
                {"gram_nonnegative", nonnegative}};
  return out;
}

Outcome hd_scan(const Params& p) {
  const int d = static_cast<int>(p.integer("d"));
  const LinearVectorField field = make_vector_field(d);
  AtomicMeasure mu;
  if (!p.text("measure").empty()) {
    mu = read_measure(p.text("measure"));
  } else {
    // Corner dust of [0, 1]^{d+1}: 2^{d+1} maps of ratio 2^{−(d+1)/α}.
    const std::size_t dim = static_cast<std::size_t>(d + 1);
    std::vector<std::vector<double>> corners;
    for (std::size_t c = 0; c < (std::size_t{1} << dim); ++c) {
      std::vector<double> corner(dim);
      for (std::size_t a = 0; a < dim; ++a) corner[a] = double(c >> a & 1);
      corners.push_back(std::move(corner));
    }
    const double ratio = std::exp2(-double(dim) / p.real("alpha"));
    mu = ifs_generate(corner_ifs(dim, corners, ratio), static_cast<int>(p.integer("depth")));
  }
  const HemisphereChart chart(d, p.real("radius"));
  const auto points =
      chart_samples(d, p.real("radius"), static_cast<std::size_t>(std::max(0L, p.integer("points"))), p.seed());
  ScanConfig config;
  config.alpha = p.real("alpha");
  config.tolerance = p.real("tolerance");
  config.r2_threshold = p.real("r2_threshold");
  const HdScanReport rep = hd_projection_scan(mu, field, chart, points, config);
  Outcome out;
  out.result = {{"d", rep.d},
                {"field", rep.field},
                {"alpha", rep.alpha},
                {"bound", rep.bound},
                {"positive_area", rep.positive_area},
                {"points", rep.rows.size()},
                {"reliable_count", rep.reliable_count},
                {"below_fraction", rep.below_fraction},
                {"median_estimate", rep.median_estimate},
                {"atoms", mu.size()}};
  out.table.header = {"point", "dim_est", "r2", "bound", "covered_area", "frame_condition", "reliable", "below"};
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const HdScanRow& r = rep.rows[i];
    out.table.rows.push_back({double(i), r.dim_est, r.r2, r.bound, r.covered_area, r.frame_condition,
                              double(r.reliable), double(r.below)});
  }
  return out;
}

Outcome regen_baselines(const Params& p) {
  BaselineSettings s;
  s.decoupling_K.clear();
  for (long K : p.integer_list("K")) s.decoupling_K.push_back(static_cast<int>(K));
  s.decoupling_ensembles = static_cast<std::size_t>(std::max(0L, p.integer("ensembles")));
  s.decoupling_seed = p.seed();
  s.strichartz_R = p.real("R");
  s.strichartz_seeds = static_cast<std::size_t>(std::max(0L, p.integer("strichartz_seeds")));
  s.strichartz_tubes = static_cast<std::size_t>(std::max(0L, p.integer("tubes")));
  s.strichartz_seed = p.seed();
  const int version = write_baselines(p.text("dir"), s, p.flag("force"));
  Outcome out;
  out.result = {{"dir", p.text("dir")},
                {"version", version},
                {"files", {decoupling_baseline_path(p.text("dir")), strichartz_baseline_path(p.text("dir"))}}};
  return out;
}

std::vector<Command> build_commands() {
  std::vector<Command> cmds;
  const auto add = [&](std::string name, std::string help, std::vector<ParamSpec> specs,
                       std::function<Outcome(const Params&)> run) {
    cmds.push_back({std::move(name), std::move(help), with_common(std::move(specs)), std::move(run)});
  };
  const auto concat = [](std::vector<ParamSpec> a, const std::vector<ParamSpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const ParamSpec curve{"curve", PT::text, "model", "curve: model, great or small:<height>"};
  const ParamSpec theta{"theta", PT::real, "0.0", "projection angle"};

  add("gen-measure", "generate a measure and write it as a container",
      concat(measure_params("cube-ifs", "5"), {{"output", PT::text, "", "container path"}}), gen_measure);
  add("project", "project a measure onto the plane orthogonal to a curve point",
      concat(measure_params("cube-ifs", "5"), {curve, theta}), project);
  add("boxdim", "box-counting dimension of a measure or of one projection",
      concat(measure_params("cube-ifs", "5"),
             {curve, theta, {"project", PT::flag, "false", "project before counting"},
              {"max_level", PT::integer, "0", "finest dyadic level (0: from the atom count)"}}),
      boxdim);
  add("energy", "Riesz energy and energy dimension",
      concat(measure_params("cube-ifs", "6"),
             {curve, theta, {"s", PT::real, "1.0", "Riesz exponent"},
              {"finest_level", PT::integer, "6", "finest dyadic level of the energy dimension"},
              {"riesz_max_atoms", PT::integer, "20000", "skip the pairwise energy above this many atoms"},
              {"project", PT::flag, "false", "use the projected measure for the energy dimension"}}),
      energy);
  const std::vector<ParamSpec> average = {
      curve,
      {"r_lo", PT::integer, "1", "smallest radius exponent"},
      {"r_hi", PT::integer, "7", "largest radius exponent"},
      {"n_rho", PT::integer, "32", "radial quadrature nodes"},
      {"n_y", PT::integer, "256", "nodes along the curve"},
  };
  add("cone-average", "conical averages of |mu^|^2 over dyadic radii",
      concat(measure_params("segment", "5"), average), cone_average);
  add("beta-fit", "decay exponent of the conical averages",
      concat(concat(measure_params("segment", "5"), average),
             {{"r2_threshold", PT::real, "0.9", "fits below are flagged"},
              {"reference_alpha", PT::real, "1.0", "dimension used for the reference exponent"}}),
      beta_fit_cmd);
  auto packet_inputs = concat(measure_params("cube-ifs", "4"), grid_params());
  for (auto& spec : packet_inputs) {
    if (spec.name == "scale") spec.fallback = "0.3";
    if (spec.name == "mollify_level") spec.fallback = "4";
  }
  add("wavepacket", "cap windows, tubes and packet audits at one (j, k)",
      concat(packet_inputs, {{"j", PT::integer, "3", "frequency level"},
                             {"k", PT::integer, "2", "angular level"},
                             {"packets", PT::integer, "4", "heaviest tubes to audit"}}),
      wavepacket);
  add("goodbad", "good/bad decomposition of a mollified measure",
      concat(packet_inputs, {{"mass", PT::real, "1.0", "mass multiplier"}}), goodbad);
  add("nonstat-check", "nonstationary phase decay of one packet's projection",
      concat(packet_inputs, {{"j", PT::integer, "3", "frequency level"},
                             {"k", PT::integer, "2", "angular level"},
                             {"theta_offset", PT::real, "1.0", "angle offset from the tube direction"},
                             {"angle_constant", PT::real, "1000", "constant of the admissible gap"},
                             {"decay_order", PT::integer, "2", "decay order N"}}),
      nonstat_check);
  add("decoupling-test", "decoupling ratio ensemble on the torus",
      {{"K", PT::integer, "8", "cap scale"},
       {"p", PT::real, "6", "exponent in [2, 6]"},
       {"ensembles", PT::integer, "5", "seeded ensembles"},
       {"per_cap", PT::integer, "4", "frequencies per cap"}},
      decoupling_test);
  add("strichartz-test", "refined Strichartz ratio for bush ensembles",
      {{"R", PT::real, "256", "scale"},
       {"tubes", PT::integer, "64", "tubes per ensemble"},
       {"seeds", PT::integer, "1", "ensembles, seeded from --seed"},
       {"delta", PT::real, "0.05", "tube exponent"},
       {"quadrature", PT::integer, "4", "midpoints per cube edge"},
       {"p", PT::real, "6", "exponent"}},
      strichartz_test);
  add("jacobian-check", "triple-product jacobian of the model curve",
      {{"eta1", PT::real, "4", "first coefficient"},
       {"eta2", PT::real, "0", "second coefficient"},
       {"theta", PT::real, "0.3", "curve parameter"}},
      jacobian_check);
  add("cone-distance", "distance from a point to the light cone",
      {{"x", PT::real, "0", ""}, {"y", PT::real, "0", ""}, {"z", PT::real, "1", ""}}, cone_distance_cmd);
  add("rank-check", "rank and determinant conditions of a frame family",
      {{"d", PT::integer, "4", "dimension (2: curve family)"},
       curve,
       {"samples", PT::integer, "1000", "sample count"},
       {"radius", PT::real, "0.5", "chart radius"},
       {"tolerance", PT::real, "1e-8", "degeneracy tolerance"},
       {"mu_min", PT::real, "1e-3", "smallest pencil weight"},
       {"lambda_max", PT::real, "5", "lambda grid half-range"},
       {"lambda_steps", PT::integer, "41", "lambda grid size"}},
      rank_check);
  add("transversality-check", "transversality determinant at the degenerate and generic pairs",
      {{"d", PT::integer, "4", "even dimension"},
       {"radius", PT::real, "0.5", "chart radius"},
       {"pairs", PT::integer, "100", "generic pairs"}},
      transversality_check);
  add("theorem1-scan", "projection dimension scan along the model curve",
      concat(concat(measure_params("cube-ifs", "7"), scan_params()), {curve}), run_theorem_scan);
  auto curved = curve;
  curved.fallback = "small:0.5";
  add("theorem2-scan", "projection dimension scan along a curved family member",
      concat(concat(measure_params("cube-ifs", "7"), scan_params()), {curved}), run_theorem_scan);
  add("hd-scan", "projection scan onto the planes of the vector-field family",
      {{"measure", PT::text, "", "container in R^{d+1} (corner dust when empty)"},
       {"d", PT::integer, "4", "even dimension"},
       {"alpha", PT::real, "1.5", "dust dimension"},
       {"depth", PT::integer, "3", "dust depth"},
       {"points", PT::integer, "16", "chart points"},
       {"radius", PT::real, "0.3", "chart radius"},
       {"tolerance", PT::real, "0.15", "below-bound tolerance"},
       {"r2_threshold", PT::real, "0.9", "minimum r² of a reliable fit"}},
      hd_scan);
  add("regen-baselines", "recompute the stored inequality baselines",
      {{"dir", PT::text, "baselines", "baseline directory"},
       {"force", PT::flag, "false", "overwrite existing baselines (bumps the version)"},
       {"K", PT::text, "4,8,16", "decoupling cap scales"},
       {"ensembles", PT::integer, "50", "decoupling ensembles per K"},
       {"R", PT::real, "256", "Strichartz scale"},
       {"strichartz_seeds", PT::integer, "10", "Strichartz ensembles"},
       {"tubes", PT::integer, "64", "tubes per Strichartz ensemble"}},
      regen_baselines);
  return cmds;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = build_commands();
  return cmds;
}

const Command& find_command(const std::string& name) {
  for (const Command& c : commands()) {
    if (c.name == name) return c;
  }
  throw PreconditionError("unknown subcommand '" + name + "'");
}

nlohmann::json make_report(const Command& command, const Params& params, const Outcome& outcome) {
  return {{"schema", 1},
          {"tool", "proj-lab"},
          {"version", kToolVersion},
          {"subcommand", command.name},
          {"config_hash", config_hash(command.name, params)},
          {"seed", params.seed()},
          {"params", params.to_json()},
          {"result", outcome.result}};
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write CSV '" + path + "'");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << "\n";
  }
}

}  // namespace projlab::cli
