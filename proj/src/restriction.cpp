#include "projlab/restriction.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <utility>

#include "projlab/errors.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

// ------------------------------------------------------------ conical averages

void ConicalQuadrature::validate() const {
  if (n_rho < 2 || n_y < 2) throw PreconditionError("conical quadrature needs n_rho, n_y ≥ 2");
}

namespace {

struct CurveNodes {
  std::vector<Vec3> points;
  double dy = 0.0;
};

CurveNodes curve_nodes(const SphereCurve& curve, std::size_t n) {
  CurveNodes nodes;
  const double span = curve.theta_max() - curve.theta_min();
  nodes.dy = span / static_cast<double>(n);
  nodes.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes.points.push_back(curve.eval(curve.theta_min() + (static_cast<double>(i) + 0.5) * nodes.dy));
  }
  return nodes;
}

void check_radius(double R) {
  if (!(R >= 1.0) || !std::isfinite(R)) throw PreconditionError("conical average needs R ≥ 1");
}

double atomic_average(const AtomicMeasure& mu, const SphereCurve& curve, double R,
                      std::size_t n_rho, std::size_t n_y) {
  const CurveNodes nodes = curve_nodes(curve, n_y);
  const double drho = 0.5 / static_cast<double>(n_rho);
  const double rho0 = 0.5 + 0.5 * drho;
  const std::size_t atoms = mu.size();
  std::vector<Vec3> x(atoms);
  for (std::size_t a = 0; a < atoms; ++a) x[a] = mu.vec3(a);
  const auto& w = mu.weights();

  std::vector<double> slots(n_y);
  parallel_for(n_y, [&](std::size_t iy) {
    const Vec3 g = nodes.points[iy];
    std::vector<cplx> sums(n_rho, cplx{});
    for (std::size_t a = 0; a < atoms; ++a) {
      const double s = dot(x[a], g);
      const double base = -kTwoPi * R * s;
      cplx z = w[a] * std::polar(1.0, base * rho0);
      const cplx step = std::polar(1.0, base * drho);
      for (std::size_t i = 0; i < n_rho; ++i) {
        sums[i] += z;
        z *= step;
      }
    }
    double acc = 0.0;
    for (const cplx& v : sums) acc += std::norm(v);
    slots[iy] = acc;
  });
  double total = 0.0;
  for (double v : slots) total += v;
  return total * drho * nodes.dy;
}

// Trilinear interpolation of a frequency-space field at ξ. Caller guarantees the
// stencil lies inside the band.
cplx interpolate_hat(const GridField& hat, Vec3 xi) {
  const long n = static_cast<long>(hat.n());
  const double step = hat.spec().freq_step();
  std::array<long, 3> base{};
  std::array<double, 3> frac{};
  for (int a = 0; a < 3; ++a) {
    const double u = xi[a] / step;
    const double f = std::floor(u);
    base[a] = static_cast<long>(f);
    frac[a] = u - f;
  }
  auto wrap = [n](long m) { return static_cast<std::size_t>(((m % n) + n) % n); };
  cplx out{};
  for (int c = 0; c < 8; ++c) {
    double weight = 1.0;
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const int bit = (c >> a) & 1;
      weight *= bit ? frac[a] : 1.0 - frac[a];
      idx[a] = wrap(base[a] + bit);
    }
    if (weight != 0.0) out += weight * hat.at(idx[0], idx[1], idx[2]);
  }
  return out;
}

void check_band(const GridField& hat, double R) {
  const double limit = hat.spec().nyquist() - hat.spec().freq_step();
  if (R > limit) {
    throw ResolutionError("conical average: R = " + std::to_string(R) +
                          " exceeds the interpolable band " + std::to_string(limit));
  }
}

double grid_average(const GridField& hat, const SphereCurve& curve, double R, std::size_t n_rho,
                    std::size_t n_y) {
  check_band(hat, R);
  const CurveNodes nodes = curve_nodes(curve, n_y);
  const double drho = 0.5 / static_cast<double>(n_rho);
  std::vector<double> slots(n_y);
  parallel_for(n_y, [&](std::size_t iy) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_rho; ++i) {
      const double rho = 0.5 + (static_cast<double>(i) + 0.5) * drho;
      acc += std::norm(interpolate_hat(hat, (R * rho) * nodes.points[iy]));
    }
    slots[iy] = acc;
  });
  double total = 0.0;
  for (double v : slots) total += v;
  return total * drho * nodes.dy;
}

void check_atomic(const AtomicMeasure& mu) {
  if (mu.dim() != 3) throw PreconditionError("conical average needs a measure on R^3");
  if (mu.support_radius() > 1.0 + 1e-9) {
    throw PreconditionError("conical average needs μ supported in the unit ball");
  }
}

template <class Eval>
AverageSeries make_series(std::span<const double> radii, const ConicalQuadrature& q, Eval eval) {
  q.validate();
  AverageSeries series;
  series.quadrature = q;
  for (double R : radii) {
    check_radius(R);
    const double fine = eval(R, q.n_rho, q.n_y);
    const double coarse = eval(R, q.n_rho / 2, q.n_y / 2);
    series.R.push_back(R);
    series.values.push_back(fine);
    series.quadrature_error.push_back(std::abs(fine - coarse) / 3.0);
  }
  return series;
}

}  // namespace

double conical_average(const AtomicMeasure& mu, const SphereCurve& curve, double R,
                       const ConicalQuadrature& quadrature) {
  quadrature.validate();
  check_radius(R);
  check_atomic(mu);
  return atomic_average(mu, curve, R, quadrature.n_rho, quadrature.n_y);
}

double conical_average(const GridField& mu, const SphereCurve& curve, double R,
                       const ConicalQuadrature& quadrature) {
  quadrature.validate();
  check_radius(R);
  if (mu.space() != Space::spatial) throw PreconditionError("conical average needs a spatial field");
  check_band(mu, R);
  return grid_average(to_frequency(mu), curve, R, quadrature.n_rho, quadrature.n_y);
}

AverageSeries conical_average_series(const AtomicMeasure& mu, const SphereCurve& curve,
                                     std::span<const double> radii,
                                     const ConicalQuadrature& quadrature) {
  check_atomic(mu);
  return make_series(radii, quadrature, [&](double R, std::size_t nr, std::size_t ny) {
    return atomic_average(mu, curve, R, nr, ny);
  });
}

AverageSeries conical_average_series(const GridField& mu, const SphereCurve& curve,
                                     std::span<const double> radii,
                                     const ConicalQuadrature& quadrature) {
  if (mu.space() != Space::spatial) throw PreconditionError("conical average needs a spatial field");
  for (double R : radii) check_band(mu, R);
  const GridField hat = to_frequency(mu);
  return make_series(radii, quadrature, [&](double R, std::size_t nr, std::size_t ny) {
    return grid_average(hat, curve, R, nr, ny);
  });
}

std::vector<double> dyadic_range(int lo, int hi) {
  std::vector<double> out;
  for (int e = lo; e <= hi; ++e) out.push_back(std::exp2(e));
  return out;
}

BetaEstimate beta_fit(const AverageSeries& series, double r2_threshold) {
  if (series.R.size() != series.values.size()) throw PreconditionError("beta fit: ragged series");
  if (series.R.size() < 4) throw PreconditionError("beta fit needs at least 4 radii");
  const auto [lo, hi] = std::minmax_element(series.R.begin(), series.R.end());
  if (!(*lo > 0.0) || std::log2(*hi / *lo) < 3.0 - 1e-12) {
    throw PreconditionError("beta fit needs radii spanning at least 3 octaves");
  }
  for (double v : series.values) {
    if (!(v > 0.0)) throw PreconditionError("beta fit: nonpositive average");
  }
  BetaEstimate est;
  est.fit = fit_loglog(series.R, series.values, 0, series.R.size());
  est.beta = -est.fit.slope;
  est.flagged = est.fit.degenerate || est.fit.r2 < r2_threshold;
  return est;
}

double beta_reference(double alpha, int d, BetaFamily family) {
  if (!(alpha >= 0.0) || alpha > d + 1.0) throw DomainError("beta_reference: α outside [0, d+1]");
  if (family == BetaFamily::cone_curve) {
    if (d != 2) throw DomainError("beta_reference: the curve table needs d = 2");
    if (alpha <= 0.5) return alpha;
    if (alpha <= 1.0) return 0.5;
    if (alpha <= 2.0) return alpha / 2.0;
    return alpha - 1.0;
  }
  if (d < 3) throw DomainError("beta_reference: the vector-field table needs d ≥ 3");
  const double dd = d;
  if (alpha <= (dd - 1.0) / 2.0) return alpha;
  if (alpha <= (dd + 1.0) / 2.0) return alpha - 0.5 * (alpha - (dd - 1.0) / 2.0);
  if (alpha <= dd) return alpha - 1.0 + (dd - alpha) / (dd - 1.0);
  return alpha - 1.0;
}

// ------------------------------------------------------------ decoupling

namespace {

constexpr int kKeyBits = 21;
constexpr long kKeyOffset = 1L << (kKeyBits - 1);

std::uint64_t pack(const LatticeFreq& n) {
  std::uint64_t key = 0;
  for (int a = 0; a < 3; ++a) {
    key = (key << kKeyBits) | static_cast<std::uint64_t>(n[a] + kKeyOffset);
  }
  return key;
}

struct Spectrum {
  std::vector<LatticeFreq> freq;
  std::vector<cplx> coef;
};

Spectrum merged_spectrum(std::span<const TorusPiece> pieces) {
  std::vector<std::pair<LatticeFreq, cplx>> all;
  for (const TorusPiece& piece : pieces) {
    if (piece.freq.size() != piece.coef.size()) throw PreconditionError("torus piece: ragged arrays");
    for (std::size_t i = 0; i < piece.freq.size(); ++i) all.emplace_back(piece.freq[i], piece.coef[i]);
  }
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Spectrum out;
  for (const auto& [f, c] : all) {
    if (!out.freq.empty() && out.freq.back() == f) {
      out.coef.back() += c;
    } else {
      out.freq.push_back(f);
      out.coef.push_back(c);
    }
  }
  return out;
}

// Σ_η |coefficient of F^order at η|² = ‖F‖_{2·order}^{2·order}.
double exact_moment(const Spectrum& s, int order) {
  const std::size_t n = s.freq.size();
  if (order == 1) {
    double acc = 0.0;
    for (const cplx& c : s.coef) acc += std::norm(c);
    return acc;
  }
  for (const LatticeFreq& f : s.freq) {
    for (long v : f) {
      if (std::abs(v) * order >= kKeyOffset) throw ResourceError("torus norm: frequency index too large");
    }
  }
  const double tuples = order == 2 ? 0.5 * n * (n + 1.0) : n * (n + 1.0) * (n + 2.0) / 6.0;
  if (tuples > 6.7e7) throw ResourceError("torus norm: too many frequency tuples");
  std::vector<std::pair<std::uint64_t, cplx>> terms;
  terms.reserve(static_cast<std::size_t>(tuples));
  auto sum = [](const LatticeFreq& a, const LatticeFreq& b) {
    return LatticeFreq{a[0] + b[0], a[1] + b[1], a[2] + b[2]};
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const LatticeFreq fij = sum(s.freq[i], s.freq[j]);
      const cplx cij = s.coef[i] * s.coef[j];
      if (order == 2) {
        terms.emplace_back(pack(fij), (i == j ? 1.0 : 2.0) * cij);
        continue;
      }
      for (std::size_t l = j; l < n; ++l) {
        const double mult = (i == j && j == l) ? 1.0 : ((i == j || j == l) ? 3.0 : 6.0);
        terms.emplace_back(pack(sum(fij, s.freq[l])), mult * cij * s.coef[l]);
      }
    }
  }
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double acc = 0.0;
  std::size_t i = 0;
  while (i < terms.size()) {
    cplx group = terms[i].second;
    std::size_t j = i + 1;
    while (j < terms.size() && terms[j].first == terms[i].first) group += terms[j++].second;
    acc += std::norm(group);
    i = j;
  }
  return acc;
}

double sampled_norm(const Spectrum& s, double p, const NormOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::array<double, 3>> points(options.mc_samples);
  for (auto& t : points) t = {unit(rng), unit(rng), unit(rng)};
  const double acc = blocked_sum(points.size(), 256, [&](std::size_t b, std::size_t e) {
    double part = 0.0;
    for (std::size_t q = b; q < e; ++q) {
      cplx value{};
      for (std::size_t i = 0; i < s.freq.size(); ++i) {
        const double phase = kTwoPi * (s.freq[i][0] * points[q][0] + s.freq[i][1] * points[q][1] +
                                       s.freq[i][2] * points[q][2]);
        value += s.coef[i] * std::polar(1.0, phase);
      }
      part += std::pow(std::abs(value), p);
    }
    return part;
  });
  return std::pow(acc / static_cast<double>(points.size()), 1.0 / p);
}

void check_exponent(double p) {
  if (!(p >= 2.0 && p <= 6.0)) throw DomainError("decoupling needs 2 ≤ p ≤ 6");
}

}  // namespace

DecouplingSetup random_phase_pieces(int K, int per_cap, std::uint64_t seed) {
  if (K < 2) throw PreconditionError("decoupling pieces need K ≥ 2");
  if (per_cap < 1) throw PreconditionError("decoupling pieces need at least one frequency per cap");
  DecouplingSetup setup;
  setup.K = K;
  setup.period = static_cast<long>(K) * K;
  const double P = static_cast<double>(setup.period);
  for (const StandardCap& cap : standard_caps(K)) {
    if (cap.side == ConeSide::forward) setup.caps.push_back(cap);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::set<LatticeFreq> used;
  for (const StandardCap& cap : setup.caps) {
    TorusPiece piece;
    int attempts = 0;
    while (static_cast<int>(piece.freq.size()) < per_cap) {
      if (++attempts > 100000) throw ResourceError("decoupling pieces: cap holds too few lattice points");
      Vec3 point = cap.box.center;
      for (int a = 0; a < 3; ++a) point += (box(rng) * cap.box.half_widths[a]) * cap.box.axes[a];
      const LatticeFreq n{std::lround(P * point.x), std::lround(P * point.y), std::lround(P * point.z)};
      const Vec3 snapped = Vec3{static_cast<double>(n[0]), static_cast<double>(n[1]),
                                static_cast<double>(n[2])} / P;
      if (!cap.box.contains(snapped) || used.contains(n)) continue;
      used.insert(n);
      piece.freq.push_back(n);
      piece.coef.push_back(std::polar(1.0, angle(rng)));
    }
    setup.pieces.push_back(std::move(piece));
  }
  return setup;
}

double torus_lp_norm(std::span<const TorusPiece> pieces, double p, const NormOptions& options) {
  if (!(p >= 1.0)) throw DomainError("torus norm needs p ≥ 1");
  const Spectrum s = merged_spectrum(pieces);
  if (s.freq.empty()) return 0.0;
  for (int order = 1; order <= 3; ++order) {
    if (p == 2.0 * order) return std::pow(exact_moment(s, order), 1.0 / p);
  }
  return sampled_norm(s, p, options);
}

double decoupling_ratio(const DecouplingSetup& setup, double p, const NormOptions& options) {
  check_exponent(p);
  if (setup.pieces.empty() || setup.pieces.size() != setup.caps.size()) {
    throw PreconditionError("decoupling needs one piece per cap");
  }
  const double P = static_cast<double>(setup.period);
  if (!(P > 0.0)) throw PreconditionError("decoupling needs a positive period");
  for (std::size_t c = 0; c < setup.caps.size(); ++c) {
    for (const LatticeFreq& n : setup.pieces[c].freq) {
      const Vec3 xi = Vec3{static_cast<double>(n[0]), static_cast<double>(n[1]),
                           static_cast<double>(n[2])} / P;
      if (!setup.caps[c].box.contains(xi)) {
        throw PreconditionError("decoupling: a frequency of piece " + std::to_string(c) +
                                " lies outside its cap");
      }
    }
  }
  const double whole = torus_lp_norm(setup.pieces, p, options);
  std::vector<double> piece_norms(setup.pieces.size());
  parallel_for(setup.pieces.size(), [&](std::size_t c) {
    piece_norms[c] = torus_lp_norm(std::span(&setup.pieces[c], 1), p, options);
  });
  double squares = 0.0;
  for (double v : piece_norms) squares += v * v;
  if (!(squares > 0.0)) throw PreconditionError("decoupling: all pieces vanish");
  return whole / std::sqrt(squares);
}

DecouplingEnsemble decoupling_ensemble(int K, double p, std::size_t ensembles,
                                       std::uint64_t base_seed, int per_cap) {
  check_exponent(p);
  if (ensembles == 0) throw PreconditionError("decoupling ensemble needs at least one draw");
  DecouplingEnsemble out;
  out.K = K;
  out.p = p;
  double sum = 0.0;
  for (std::size_t e = 0; e < ensembles; ++e) {
    const std::uint64_t seed = base_seed + e;
    const double r = decoupling_ratio(random_phase_pieces(K, per_cap, seed), p);
    out.seeds.push_back(seed);
    out.ratios.push_back(r);
    out.max_ratio = std::max(out.max_ratio, r);
    sum += r;
  }
  out.mean_ratio = sum / static_cast<double>(ensembles);
  return out;
}

// ------------------------------------------------------------ refined Strichartz

double packet_profile(double x, double h) {
  const double u = 2.0 * h * x;
  const double s = std::sin(kPi * u);
  const double box = std::abs(u) < 1e-8 ? 2.0 * h : s / (kPi * x);
  double hann;
  if (std::abs(u) < 1e-8) {
    hann = 1.0;
  } else if (std::abs(std::abs(u) - 1.0) < 1e-7) {
    hann = 0.5;
  } else {
    hann = s / (kPi * u * (1.0 - u * u));
  }
  return box * hann;
}

double packet_profile_hat(double xi, double h) {
  auto cdf = [h](double t) {
    if (t <= -h) return 0.0;
    if (t >= h) return 1.0;
    return (t + h) / (2.0 * h) + std::sin(kPi * t / h) / kTwoPi;
  };
  return cdf(xi + h) - cdf(xi - h);
}

namespace {

template <class F>
double simpson(F f, double a, double b, std::size_t intervals) {
  if (intervals % 2) ++intervals;
  const double step = (b - a) / static_cast<double>(intervals);
  double acc = f(a) + f(b);
  for (std::size_t i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + step * i);
  return acc * step / 3.0;
}

// ∫|P|² over its support [−2h, 2h]; P is smooth on each half.
double profile_energy(double h) {
  const auto sq = [h](double xi) {
    const double v = packet_profile_hat(xi, h);
    return v * v;
  };
  return 2.0 * simpson(sq, 0.0, 2.0 * h, 4096);
}

double profile_energy_inside(double h, double w) {
  const auto sq = [h](double x) {
    const double v = packet_profile(x, h);
    return v * v;
  };
  const std::size_t intervals = std::max<std::size_t>(8192, static_cast<std::size_t>(64.0 * w * h));
  return 2.0 * simpson(sq, 0.0, w, intervals);
}

}  // namespace

cplx WavePacket::operator()(Vec3 x) const {
  const Vec3 d = x - tube.center;
  double envelope = 1.0;
  for (int a = 0; a < 3; ++a) envelope *= packet_profile(dot(d, tube.axes[a]), 0.5 * freq_half_widths[a]);
  return amplitude * std::polar(envelope, kTwoPi * dot(frequency, d));
}

double WavePacket::l2_norm() const {
  double energy = 1.0;
  for (double H : freq_half_widths) energy *= profile_energy(0.5 * H);
  return std::abs(amplitude) * std::sqrt(energy);
}

double WavePacket::energy_outside_tube() const {
  double inside = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double h = 0.5 * freq_half_widths[a];
    const double fraction = profile_energy_inside(h, tube.half_widths[a]) / profile_energy(h);
    inside *= std::min(1.0, fraction);
  }
  return std::max(0.0, 1.0 - inside);
}

WavePacket make_wave_packet(double phi, ConeSide side, Vec3 tube_center, cplx amplitude,
                            const StrichartzParams& params) {
  const double R = params.R;
  if (!(R >= 4.0)) throw PreconditionError("wave packets need R ≥ 4");
  WavePacket packet;
  packet.tube.axes = cone_frame(phi, side);
  packet.tube.center = tube_center;
  packet.frequency = 0.75 * packet.tube.axes[1];
  packet.freq_half_widths = {2.0 / std::sqrt(R), 0.25, 2.0 / R};
  const double cross = std::pow(R, 0.5 * (1.0 + params.delta));
  packet.tube.half_widths = {cross, cross, 1.5 * R};
  packet.amplitude = amplitude;
  return packet;
}

int strichartz_slot_count(double R) {
  return std::max(4, static_cast<int>(std::ceil(kPi * std::sqrt(R) - 1e-9)));
}

bool box_meets_cube(const OrientedBox& box, Vec3 cube_center, double cube_side) {
  const Vec3 d = box.center - cube_center;
  const double half = 0.5 * cube_side;
  const std::array<Vec3, 3> cube_axes{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  auto separated = [&](Vec3 axis) {
    const double len = norm(axis);
    if (len < 1e-12) return false;
    axis = axis / len;
    double rb = 0.0;
    for (int a = 0; a < 3; ++a) rb += box.half_widths[a] * std::abs(dot(box.axes[a], axis));
    const double rc = half * (std::abs(axis.x) + std::abs(axis.y) + std::abs(axis.z));
    return std::abs(dot(d, axis)) > rb + rc;
  };
  for (const Vec3& a : cube_axes) {
    if (separated(a)) return false;
  }
  for (const Vec3& a : box.axes) {
    if (separated(a)) return false;
  }
  for (const Vec3& a : cube_axes) {
    for (const Vec3& b : box.axes) {
      if (separated(cross(a, b))) return false;
    }
  }
  return true;
}

namespace {

OrientedBox dilated(const OrientedBox& box, double factor) {
  OrientedBox out = box;
  for (double& h : out.half_widths) h *= factor;
  return out;
}

}  // namespace

std::vector<Vec3> cubes_meeting_tubes(const std::vector<WavePacket>& packets, double R) {
  const double side = std::sqrt(R);
  const long reach = static_cast<long>(std::ceil(R / side));
  std::vector<OrientedBox> doubled;
  for (const WavePacket& p : packets) doubled.push_back(dilated(p.tube, 2.0));
  const double corner = side * std::sqrt(3.0) / 2.0;
  std::vector<Vec3> out;
  for (long i = -reach; i < reach; ++i) {
    for (long j = -reach; j < reach; ++j) {
      for (long k = -reach; k < reach; ++k) {
        const Vec3 c{(i + 0.5) * side, (j + 0.5) * side, (k + 0.5) * side};
        if (norm(c) + corner > R) continue;
        for (const OrientedBox& b : doubled) {
          if (box_meets_cube(b, c, side)) {
            out.push_back(c);
            break;
          }
        }
      }
    }
  }
  return out;
}

std::size_t incidence_count(const std::vector<WavePacket>& packets,
                            std::span<const Vec3> cube_centers, double cube_side) {
  std::vector<OrientedBox> doubled;
  for (const WavePacket& p : packets) doubled.push_back(dilated(p.tube, 2.0));
  std::size_t best = 1;
  for (const Vec3& c : cube_centers) {
    std::size_t count = 0;
    for (const OrientedBox& b : doubled) count += box_meets_cube(b, c, cube_side) ? 1 : 0;
    best = std::max(best, count);
  }
  return best;
}

PacketEnsemble make_ensemble(std::vector<WavePacket> packets, const StrichartzParams& params) {
  PacketEnsemble ens;
  ens.params = params;
  ens.packets = std::move(packets);
  ens.cube_side = std::sqrt(params.R);
  ens.cube_centers = cubes_meeting_tubes(ens.packets, params.R);
  ens.incidence = incidence_count(ens.packets, ens.cube_centers, ens.cube_side);
  return ens;
}

PacketEnsemble bush_ensemble(std::size_t count, std::uint64_t seed, const StrichartzParams& params) {
  const int slots = strichartz_slot_count(params.R);
  const std::size_t caps = 2 * static_cast<std::size_t>(slots);
  if (count == 0 || count > caps) {
    throw PreconditionError("bush ensemble: needs 1.." + std::to_string(caps) + " tubes");
  }
  std::vector<std::size_t> order(caps);
  for (std::size_t i = 0; i < caps; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::vector<WavePacket> packets;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t c = order[n];
    const ConeSide side = c < static_cast<std::size_t>(slots) ? ConeSide::forward : ConeSide::backward;
    const double phi = kTwoPi * (static_cast<double>(c % slots) + 0.5) / slots;
    packets.push_back(make_wave_packet(phi, side, Vec3{}, std::polar(1.0, angle(rng)), params));
  }
  return make_ensemble(std::move(packets), params);
}

StrichartzResult strichartz_experiment(const PacketEnsemble& ensemble, double p) {
  if (!(p >= 2.0 && p <= 6.0)) throw DomainError("strichartz experiment needs 2 ≤ p ≤ 6");
  const auto& packets = ensemble.packets;
  if (packets.empty()) throw PreconditionError("strichartz experiment: the tube set is empty");
  if (ensemble.cube_centers.empty()) throw PreconditionError("strichartz experiment: Y is empty");
  if (ensemble.incidence < 1) throw PreconditionError("strichartz experiment: M must be ≥ 1");
  if (ensemble.params.quadrature < 1) throw PreconditionError("strichartz experiment: quadrature ≥ 1");

  StrichartzResult res;
  res.tubes = packets.size();
  res.cubes = ensemble.cube_centers.size();
  res.incidence = ensemble.incidence;

  std::vector<double> norms(packets.size());
  std::vector<double> outside(packets.size());
  parallel_for(packets.size(), [&](std::size_t i) {
    norms[i] = packets[i].l2_norm();
    outside[i] = packets[i].energy_outside_tube();
  });
  const auto [lo, hi] = std::minmax_element(norms.begin(), norms.end());
  if (!(*lo > 0.0) || *hi > 2.0 * *lo) {
    throw PreconditionError("strichartz experiment: ‖f_T‖₂ is not constant up to a factor 2");
  }
  res.max_outside_energy = *std::max_element(outside.begin(), outside.end());
  if (res.max_outside_energy >= ensemble.params.support_threshold) {
    throw PreconditionError("strichartz experiment: f_T is not essentially supported in T");
  }
  if (incidence_count(packets, ensemble.cube_centers, ensemble.cube_side) > ensemble.incidence) {
    throw PreconditionError("strichartz experiment: a cube meets more than M tubes 2T");
  }

  const int q = ensemble.params.quadrature;
  const double side = ensemble.cube_side;
  const double step = side / q;
  std::vector<double> per_cube(ensemble.cube_centers.size());
  parallel_for(per_cube.size(), [&](std::size_t c) {
    const Vec3 corner = ensemble.cube_centers[c] - Vec3{0.5 * side, 0.5 * side, 0.5 * side};
    double acc = 0.0;
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < q; ++j) {
        for (int k = 0; k < q; ++k) {
          const Vec3 x = corner + Vec3{(i + 0.5) * step, (j + 0.5) * step, (k + 0.5) * step};
          cplx value{};
          for (const WavePacket& packet : packets) value += packet(x);
          acc += std::pow(std::abs(value), p);
        }
      }
    }
    per_cube[c] = acc * step * step * step;
  });
  double total = 0.0;
  for (double v : per_cube) total += v;
  res.lhs = std::pow(total, 1.0 / p);

  double squares = 0.0;
  for (double v : norms) squares += v * v;
  const double R = ensemble.params.R;
  const double factor = static_cast<double>(ensemble.incidence) * std::pow(R, -1.5) /
                        static_cast<double>(packets.size());
  res.rhs = std::pow(factor, 0.5 - 1.0 / p) * std::sqrt(squares);
  res.ratio = res.lhs / res.rhs;
  return res;
}

// ------------------------------------------------------------ Lorentz rescaling

namespace {

RescaledBox compare(std::array<double, 3> got, std::array<double, 3> expected) {
  std::sort(got.begin(), got.end(), std::greater<>());
  std::sort(expected.begin(), expected.end(), std::greater<>());
  RescaledBox out{got, expected, true};
  for (int a = 0; a < 3; ++a) {
    const double r = got[a] / expected[a];
    if (!(r >= 0.25 && r <= 4.0)) out.within_factor4 = false;
  }
  return out;
}

}  // namespace

LorentzRescaling::LorentzRescaling(const StandardCap& tau, double R) : tau_(tau), R_(R) {
  if (!(R >= 1.0)) throw PreconditionError("Lorentz rescaling needs R ≥ 1");
  const double tangential = tau.box.half_widths[0] * std::pow(R, 0.25);
  const double normal = tau.box.half_widths[2] * std::sqrt(R);
  if (tangential < 0.5 || tangential > 2.0 || normal < 0.5 || normal > 3.0 ||
      tau.box.half_widths[1] < 0.25 || tau.box.half_widths[1] > 1.0) {
    throw PreconditionError("Lorentz rescaling needs a cap of dimensions 1 × R^{-1/4} × R^{-1/2}");
  }
  scale_ = {std::pow(R, 0.25), 1.0, std::sqrt(R)};
}

Vec3 LorentzRescaling::apply(Vec3 xi) const {
  Vec3 out{};
  for (int a = 0; a < 3; ++a) out += (scale_[a] * dot(xi, tau_.box.axes[a])) * tau_.box.axes[a];
  return out;
}

Vec3 LorentzRescaling::inverse(Vec3 xi) const {
  Vec3 out{};
  for (int a = 0; a < 3; ++a) out += (dot(xi, tau_.box.axes[a]) / scale_[a]) * tau_.box.axes[a];
  return out;
}

double LorentzRescaling::determinant() const { return scale_[0] * scale_[1] * scale_[2]; }

std::function<cplx(Vec3)> LorentzRescaling::rescale(std::function<cplx(Vec3)> field) const {
  const double amp = std::sqrt(determinant());
  return [self = *this, amp, f = std::move(field)](Vec3 y) { return amp * f(self.apply(y)); };
}

std::array<double, 3> LorentzRescaling::rescaled_semi_axes(const OrientedBox& box) const {
  Eigen::Matrix3d m;
  for (int a = 0; a < 3; ++a) {
    const Vec3 col = inverse(box.half_widths[a] * box.axes[a]);
    m.col(a) << col.x, col.y, col.z;
  }
  const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(m).singularValues();
  return {sv(0), sv(1), sv(2)};
}

LorentzReport LorentzRescaling::report(double delta, double phi_offset) const {
  LorentzReport rep;
  rep.determinant = determinant();
  const double R = R_;

  OrientedBox dual;
  dual.center = Vec3{};
  dual.axes = tau_.box.axes;
  dual.half_widths = {0.5 * std::pow(R, 0.75 * (1.0 + delta)), 0.5 * std::pow(R, 0.5 * (1.0 + delta)),
                      0.5 * R};
  const double half_cube = 0.5 * std::sqrt(R);
  rep.dual_box = compare(rescaled_semi_axes(dual), {half_cube, half_cube, half_cube});

  const Vec3 t = tau_.box.axes[0];
  const double phi = std::atan2(-t.x, t.y);
  OrientedBox sub;
  sub.center = Vec3{};
  sub.axes = cone_frame(phi + phi_offset, tau_.side);
  sub.half_widths = {std::pow(R, 0.5 + 0.5 * delta) / 200.0, std::pow(R, 0.25 + 0.5 * delta) / 200.0,
                     1.5 * R};
  const double short_side = std::pow(R, 0.25 + 0.5 * delta) / 200.0;
  rep.sub_tube = compare(rescaled_semi_axes(sub), {short_side, short_side, 1.5 * std::sqrt(R)});
  return rep;
}

}  // namespace projlab
