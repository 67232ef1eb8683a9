#include "projlab/projections.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "projlab/errors.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

ProjectedMeasure2D project_measure(const AtomicMeasure& mu, const SphereCurve& curve,
                                   double theta) {
  if (mu.dim() != 3) throw PreconditionError("project_measure needs a measure in R^3");
  ProjectedMeasure2D out;
  out.frame = curve.jet(theta).frame;
  out.theta = theta;
  out.weights = mu.weights();
  out.total_mass = mu.total_mass();
  out.coords.resize(2 * mu.size());
  const Vec3 e1 = out.frame.e1;
  const Vec3 e2 = out.frame.e2;
  const double* x = mu.coords().data();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Vec3 p{x[3 * i], x[3 * i + 1], x[3 * i + 2]};
    out.coords[2 * i] = dot(p, e1);
    out.coords[2 * i + 1] = dot(p, e2);
  }
  return out;
}

// ---------------------------------------------------------------- fits

DecayFit fit_loglog(std::vector<double> scales, std::vector<double> values, std::size_t window_lo,
                    std::size_t window_hi) {
  if (scales.size() != values.size()) throw PreconditionError("fit needs matching series");
  DecayFit fit;
  fit.scales = std::move(scales);
  fit.values = std::move(values);
  window_hi = std::min(window_hi, fit.values.size());
  fit.window_lo = window_lo;
  fit.window_hi = window_hi;
  if (window_hi < window_lo + 2) {
    fit.degenerate = true;
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(window_hi - window_lo);
  for (std::size_t i = window_lo; i < window_hi; ++i) {
    if (!(fit.values[i] > 0.0) || !(fit.scales[i] > 0.0)) {
      throw PreconditionError("log-log fit needs positive scales and values");
    }
    const double x = std::log2(fit.scales[i]);
    const double y = std::log2(fit.values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double vx = sxx - sx * sx / m;
  if (!(vx > 0.0)) {
    fit.degenerate = true;
    return fit;
  }
  fit.slope = (sxy - sx * sy / m) / vx;
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = sy / m;
  for (std::size_t i = window_lo; i < window_hi; ++i) {
    const double x = std::log2(fit.scales[i]);
    const double y = std::log2(fit.values[i]);
    const double r = y - (fit.intercept + fit.slope * x);
    ss_res += r * r;
    ss_tot += (y - ybar) * (y - ybar);
  }
  fit.r2 = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

// ---------------------------------------------------------------- densities

double Density2D::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell() * cell();
}

namespace {

// Returns false when any of the four bilinear targets falls outside the grid.
bool deposit_bilinear(Density2D& d, double u, double v, double mass) {
  const double h = d.cell();
  const double gu = (u + d.half_width) / h;
  const double gv = (v + d.half_width) / h;
  const double fu = std::floor(gu);
  const double fv = std::floor(gv);
  const double au = gu - fu;
  const double av = gv - fv;
  const long iu = static_cast<long>(fu);
  const long iv = static_cast<long>(fv);
  const long n = static_cast<long>(d.n);
  bool inside = true;
  const double w[4] = {(1 - au) * (1 - av), au * (1 - av), (1 - au) * av, au * av};
  const long du[4] = {0, 1, 0, 1};
  const long dv[4] = {0, 0, 1, 1};
  const double scale = mass / (h * h);
  for (int c = 0; c < 4; ++c) {
    if (w[c] == 0.0) continue;
    const long a = iu + du[c];
    const long b = iv + dv[c];
    if (a < 0 || b < 0 || a >= n || b >= n) {
      inside = false;
      continue;
    }
    d.values[static_cast<std::size_t>(a * n + b)] += w[c] * scale;
  }
  return inside;
}

Density2D empty_density(const Grid2DSpec& g) {
  if (g.n < 2 || !(g.half_width > 0.0)) throw PreconditionError("invalid 2D grid");
  Density2D d;
  d.n = g.n;
  d.half_width = g.half_width;
  d.values.assign(g.n * g.n, 0.0);
  return d;
}

}  // namespace

Density2D pushforward_density(const GridField& f, const SphereCurve& curve, double theta,
                              const Grid2DSpec& grid2d) {
  if (f.space() != Space::spatial) throw PreconditionError("pushforward_density needs a spatial field");
  Density2D d = empty_density(grid2d);
  const PlaneFrame frame = curve.jet(theta).frame;
  const std::size_t n = f.n();
  const double vol = f.cell_volume();
  double peak = 0.0;
  for (const auto& v : f.values()) peak = std::max(peak, std::abs(v.real()));
  const double border_tol = 1e-12 * peak;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const double v = f.at(i, j, k).real();
        if (v == 0.0) continue;
        const bool border = i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1;
        if (border && std::abs(v) > border_tol) {
          d.truncated = true;
        }
        const Vec3 x = f.point(i, j, k);
        if (!deposit_bilinear(d, dot(x, frame.e1), dot(x, frame.e2), v * vol)) d.truncated = true;
      }
    }
  }
  return d;
}

Density2D histogram_density(const ProjectedMeasure2D& mu, const Grid2DSpec& grid2d) {
  Density2D d = empty_density(grid2d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!deposit_bilinear(d, mu.coords[2 * i], mu.coords[2 * i + 1], mu.weights[i])) {
      d.truncated = true;
    }
  }
  return d;
}

// ---------------------------------------------------------------- box counting

namespace {

struct MortonCloud {
  std::vector<std::uint64_t> keys;  // sorted
  unsigned bits = 0;                // per axis
  std::size_t dim = 0;
  bool degenerate = false;
};

MortonCloud morton_keys(std::span<const double> coords, std::size_t dim) {
  MortonCloud cloud;
  cloud.dim = dim;
  const std::size_t n = dim == 0 ? 0 : coords.size() / dim;
  if (dim == 0 || dim > 8) throw PreconditionError("box counting supports dimensions 1 to 8");
  cloud.bits = static_cast<unsigned>(std::min<std::size_t>(63 / dim, 30));
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], coords[i * dim + a]);
      hi[a] = std::max(hi[a], coords[i * dim + a]);
    }
  double side = 0.0;
  for (std::size_t a = 0; a < dim; ++a) side = std::max(side, hi[a] - lo[a]);
  if (n < 2 || !(side > 0.0)) {
    cloud.degenerate = true;
    return cloud;
  }
  side *= 1.0 + 1e-9;
  const double cells = std::ldexp(1.0, static_cast<int>(cloud.bits));
  cloud.keys.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t key = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double t = (coords[i * dim + a] - lo[a]) / side;
      auto q = static_cast<std::uint64_t>(std::min(cells - 1.0, std::floor(t * cells)));
      for (unsigned b = 0; b < cloud.bits; ++b) {
        key |= ((q >> b) & 1ULL) << (b * dim + a);
      }
    }
    cloud.keys[i] = key;
  }
  std::sort(cloud.keys.begin(), cloud.keys.end());
  return cloud;
}

std::size_t distinct_prefixes(const std::vector<std::uint64_t>& keys, unsigned shift) {
  if (keys.empty()) return 0;
  std::size_t count = 1;
  std::uint64_t prev = shift >= 64 ? 0 : keys[0] >> shift;
  for (std::size_t i = 1; i < keys.size(); ++i) {
    const std::uint64_t p = shift >= 64 ? 0 : keys[i] >> shift;
    if (p != prev) {
      ++count;
      prev = p;
    }
  }
  return count;
}

}  // namespace

DecayFit box_dimension(std::span<const double> coords, std::size_t dim,
                       const BoxCountOptions& options) {
  const MortonCloud cloud = morton_keys(coords, dim);
  if (cloud.degenerate) {
    DecayFit fit;
    fit.degenerate = true;
    fit.scales = {1.0};
    fit.values = {coords.empty() ? 0.0 : 1.0};
    return fit;
  }
  const std::size_t n = cloud.keys.size();
  int max_level = static_cast<int>(cloud.bits);
  if (options.max_level > 0) max_level = std::min(max_level, options.max_level);
  std::vector<double> scales, values;
  for (int level = 0; level <= max_level; ++level) {
    const unsigned shift = static_cast<unsigned>(dim * (cloud.bits - static_cast<unsigned>(level)));
    const std::size_t count = distinct_prefixes(cloud.keys, shift);
    scales.push_back(std::ldexp(1.0, level));
    values.push_back(static_cast<double>(count));
    // Stop once boxes resolve a quarter of the points; finer levels only saturate.
    if (options.max_level == 0 && 4 * count >= n) break;
  }
  const std::size_t levels = values.size();
  const std::size_t lo = options.discard_coarse;
  const std::size_t hi = levels > options.discard_fine ? levels - options.discard_fine : 0;
  if (hi < lo + 4) {
    throw PreconditionError("box counting window spans fewer than 3 octaves (" +
                            std::to_string(levels) + " levels available)");
  }
  return fit_loglog(std::move(scales), std::move(values), lo, hi);
}

DecayFit box_dimension(const AtomicMeasure& mu, const BoxCountOptions& options) {
  return box_dimension(mu.coords(), mu.dim(), options);
}

DecayFit box_dimension(const ProjectedMeasure2D& mu, const BoxCountOptions& options) {
  return box_dimension(mu.coords, 2, options);
}

// ---------------------------------------------------------------- energy dimension

namespace {

struct CoarseCells {
  std::vector<double> centers;  // barycenters, dim entries each
  std::vector<double> masses;
};

CoarseCells coarse_grain(std::span<const double> coords, std::span<const double> weights,
                         std::size_t dim, int level) {
  const std::size_t n = weights.size();
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], coords[i * dim + a]);
      hi[a] = std::max(hi[a], coords[i * dim + a]);
    }
  double side = 0.0;
  for (std::size_t a = 0; a < dim; ++a) side = std::max(side, hi[a] - lo[a]);
  side = side > 0.0 ? side * (1.0 + 1e-9) : 1.0;
  const double cells = std::ldexp(1.0, level);
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t key = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double t = (coords[i * dim + a] - lo[a]) / side;
      key = key * static_cast<std::uint64_t>(cells) +
            static_cast<std::uint64_t>(std::min(cells - 1.0, std::floor(t * cells)));
    }
    keyed[i] = {key, i};
  }
  std::sort(keyed.begin(), keyed.end());
  CoarseCells out;
  for (std::size_t b = 0; b < n;) {
    std::size_t e = b;
    double mass = 0.0;
    std::vector<double> c(dim, 0.0);
    while (e < n && keyed[e].first == keyed[b].first) {
      const std::size_t i = keyed[e].second;
      mass += weights[i];
      for (std::size_t a = 0; a < dim; ++a) c[a] += weights[i] * coords[i * dim + a];
      ++e;
    }
    if (mass > 0.0) {
      for (std::size_t a = 0; a < dim; ++a) out.centers.push_back(c[a] / mass);
      out.masses.push_back(mass);
    }
    b = e;
  }
  return out;
}

// Off-diagonal Riesz energies of the cell measure for every s in the grid.
std::vector<double> cell_energies(const CoarseCells& cells, std::size_t dim,
                                  std::span<const double> s_grid) {
  const std::size_t m = cells.masses.size();
  const std::size_t ns = s_grid.size();
  bool uniform = ns >= 2;
  const double step = ns >= 2 ? s_grid[1] - s_grid[0] : 0.0;
  for (std::size_t k = 2; k < ns && uniform; ++k) {
    uniform = std::abs((s_grid[k] - s_grid[k - 1]) - step) < 1e-12;
  }
  constexpr std::size_t kBlock = 32;
  const std::size_t blocks = (m + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks * ns, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    double* acc = partial.data() + b * ns;
    for (std::size_t i = b * kBlock; i < std::min(m, (b + 1) * kBlock); ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
          const double d = cells.centers[i * dim + a] - cells.centers[j * dim + a];
          d2 += d * d;
        }
        if (d2 == 0.0) continue;
        const double w = 2.0 * cells.masses[i] * cells.masses[j];
        const double log_d = 0.5 * std::log(d2);
        if (uniform) {
          double term = std::exp(-s_grid[0] * log_d);
          const double ratio = std::exp(-step * log_d);
          for (std::size_t k = 0; k < ns; ++k) {
            acc[k] += w * term;
            term *= ratio;
          }
        } else {
          for (std::size_t k = 0; k < ns; ++k) acc[k] += w * std::exp(-s_grid[k] * log_d);
        }
      }
    }
  });
  std::vector<double> out(ns, 0.0);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < ns; ++k) out[k] += partial[b * ns + k];
  return out;
}

EnergyDimension energy_dimension_impl(std::span<const double> coords,
                                      std::span<const double> weights, std::size_t dim,
                                      std::span<const double> s_grid,
                                      const EnergyDimensionOptions& options) {
  if (s_grid.empty()) throw PreconditionError("energy_dimension needs a nonempty s grid");
  if (!std::is_sorted(s_grid.begin(), s_grid.end())) throw PreconditionError("s grid must be sorted");
  if (options.increments < 2 || options.finest_level - options.increments < 0) {
    throw PreconditionError("energy_dimension needs at least two increments above level 0");
  }
  EnergyDimension out;
  out.s_grid.assign(s_grid.begin(), s_grid.end());
  out.increment_ratio.assign(s_grid.size(), 0.0);
  std::vector<std::vector<double>> energies;
  std::size_t occupied = 0;
  const int first = options.finest_level - options.increments;
  for (int level = first; level <= options.finest_level; ++level) {
    const CoarseCells cells = coarse_grain(coords, weights, dim, level);
    occupied = cells.masses.size();
    energies.push_back(cell_energies(cells, dim, s_grid));
  }
  out.value = s_grid.front();
  if (occupied < 2) {
    out.degenerate = true;
    return out;
  }
  const double m = static_cast<double>(options.increments);
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 1; i <= options.increments; ++i) {
      const double inc = energies[i][k] - energies[i - 1][k];
      const double y = std::log2(std::max(inc, 1e-300));
      sx += i;
      sy += y;
      sxx += static_cast<double>(i) * i;
      sxy += i * y;
    }
    const double slope = (sxy - sx * sy / m) / (sxx - sx * sx / m);
    out.increment_ratio[k] = std::exp2(slope);
    if (slope < 0.0) out.value = s_grid[k];
  }
  return out;
}

}  // namespace

EnergyDimension energy_dimension(const ProjectedMeasure2D& mu, std::span<const double> s_grid,
                                 const EnergyDimensionOptions& options) {
  for (double s : s_grid) {
    if (!(s > 0.0 && s < 2.0)) throw PreconditionError("planar energy exponents must lie in (0, 2)");
  }
  return energy_dimension_impl(mu.coords, mu.weights, 2, s_grid, options);
}

EnergyDimension energy_dimension(const AtomicMeasure& mu, std::span<const double> s_grid,
                                 const EnergyDimensionOptions& options) {
  for (double s : s_grid) {
    if (!(s > 0.0 && s < static_cast<double>(mu.dim()))) {
      throw PreconditionError("energy exponents must lie in (0, dim)");
    }
  }
  return energy_dimension_impl(mu.coords(), mu.weights(), mu.dim(), s_grid, options);
}

// ---------------------------------------------------------------- scans

BoundKind scan_bound_kind(const SphereCurve& curve, double alpha) {
  if (alpha > 2.5) return BoundKind::positive_area;
  if (curve.kind() == CurveKind::model_cone_circle && alpha > 1.5 && alpha < 2.5) {
    return BoundKind::model_curve;
  }
  return BoundKind::curved_family;
}

double scan_bound(BoundKind kind, double alpha) {
  switch (kind) {
    case BoundKind::model_curve:
      return model_curve_bound(alpha);
    case BoundKind::curved_family:
      return curved_family_bound(alpha);
    case BoundKind::positive_area:
      return 2.0;
  }
  return 0.0;
}

ScanReport theorem_scan(const AtomicMeasure& a, const SphereCurve& curve,
                        std::span<const double> thetas, const ScanConfig& config) {
  if (thetas.empty()) throw PreconditionError("theorem_scan needs at least one angle");
  ScanReport report;
  report.curve = curve.name();
  report.bound_kind = scan_bound_kind(curve, config.alpha);
  report.bound = scan_bound(report.bound_kind, config.alpha);
  report.rows.resize(thetas.size());
  parallel_for(thetas.size(), [&](std::size_t i) {
    const ProjectedMeasure2D p = project_measure(a, curve, thetas[i]);
    const DecayFit fit = box_dimension(p, config.box);
    ScanRow row{};
    row.theta = thetas[i];
    row.dim_est = fit.slope;
    row.r2 = fit.r2;
    row.bound = report.bound;
    if (!fit.degenerate && fit.window_hi > 0) {
      const std::size_t last = fit.window_hi - 1;
      row.covered_area = fit.values[last] / (fit.scales[last] * fit.scales[last]);
    }
    row.reliable = !fit.degenerate && fit.r2 >= config.r2_threshold;
    row.below = row.reliable && row.dim_est < report.bound - config.tolerance;
    report.rows[i] = row;
  });
  std::size_t below = 0;
  for (const auto& row : report.rows) {
    if (!row.reliable) continue;
    ++report.reliable_count;
    if (row.below) ++below;
  }
  report.below_fraction =
      report.reliable_count > 0 ? static_cast<double>(below) / report.reliable_count : 0.0;
  return report;
}

double kappa_floor(double s) { return std::max(0.0, std::min(2.0 * s / 3.0 - 1.0, 0.5)); }

BadDirectionReport bad_direction_fraction(const AtomicMeasure& nu, const SphereCurve& curve,
                                          const BadDirectionConfig& config) {
  if (nu.dim() != 3) throw PreconditionError("bad_direction_fraction needs a measure in R^3");
  if (!(config.delta > 0.0 && config.delta < 1.0)) throw PreconditionError("delta must lie in (0, 1)");
  if (!(config.s >= 0.0 && config.s < 2.5)) throw PreconditionError("s must lie in [0, 5/2)");
  if (!(config.kappa > kappa_floor(config.s))) {
    throw PreconditionError("kappa must exceed max{0, min{2s/3 - 1, 1/2}} = " +
                            std::to_string(kappa_floor(config.s)));
  }
  if (!(config.eta > 0.0)) throw PreconditionError("eta must be positive");
  const double span = curve.theta_max() - curve.theta_min();
  const double dtheta = span / static_cast<double>(std::max<std::size_t>(config.thetas, 1));
  if (config.thetas == 0 || dtheta > std::sqrt(config.delta) / 4.0) {
    throw ResolutionError("theta grid needs at least 4 samples per delta^(1/2) window (" +
                          std::to_string(static_cast<std::size_t>(std::ceil(4.0 * span / std::sqrt(config.delta)))) +
                          " angles)");
  }

  BadDirectionReport report;
  report.threshold = std::pow(config.delta, config.s - config.kappa);
  report.angle_threshold = std::pow(config.delta, config.eta);
  const std::size_t n = nu.size();
  const std::size_t samples = config.max_samples == 0 ? n : std::min(n, config.max_samples);
  report.sample_index.resize(samples);
  double sampled_mass = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    report.sample_index[k] = samples == n ? k : k * n / samples;
    sampled_mass += nu.weight(report.sample_index[k]);
  }
  report.thetas.resize(config.thetas);
  for (std::size_t t = 0; t < config.thetas; ++t) {
    report.thetas[t] = curve.theta_min() + (static_cast<double>(t) + 0.5) * dtheta;
  }
  report.concentrated_fraction.assign(config.thetas, 0.0);
  report.angle_measure.assign(samples, 0.0);
  if (n == 0 || report.threshold > nu.total_mass()) return report;

  std::vector<std::vector<char>> hit(config.thetas);
  parallel_for(config.thetas, [&](std::size_t t) {
    const ProjectedMeasure2D p = project_measure(nu, curve, report.thetas[t]);
    const AtomicMeasure planar = p.as_measure();
    const BallMassIndex index(planar);
    std::vector<char>& row = hit[t];
    row.assign(samples, 0);
    double heavy = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
      const std::size_t i = report.sample_index[k];
      if (index.mass(planar.point(i), config.delta) >= report.threshold) {
        row[k] = 1;
        heavy += nu.weight(i);
      }
    }
    report.concentrated_fraction[t] = sampled_mass > 0.0 ? heavy / sampled_mass : 0.0;
  });
  for (std::size_t t = 0; t < config.thetas; ++t)
    for (std::size_t k = 0; k < samples; ++k)
      if (hit[t][k]) report.angle_measure[k] += dtheta;
  double bad = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    if (report.angle_measure[k] >= report.angle_threshold) bad += nu.weight(report.sample_index[k]);
  }
  report.set_mass = sampled_mass > 0.0 ? bad * nu.total_mass() / sampled_mass : 0.0;
  report.ratio = report.set_mass / (nu.total_mass() * report.angle_threshold);
  return report;
}

}  // namespace projlab
