#include "projlab/cone_decomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "projlab/errors.hpp"
#include "projlab/geometry.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

// ---------------------------------------------------------------- boxes

std::array<double, 3> OrientedBox::local(Vec3 p) const {
  const Vec3 d = p - center;
  return {dot(d, axes[0]) / half_widths[0], dot(d, axes[1]) / half_widths[1],
          dot(d, axes[2]) / half_widths[2]};
}

bool OrientedBox::contains(Vec3 p, double dilation) const {
  const auto u = local(p);
  return std::abs(u[0]) <= dilation && std::abs(u[1]) <= dilation && std::abs(u[2]) <= dilation;
}

std::array<Vec3, 8> OrientedBox::corners(double dilation) const {
  std::array<Vec3, 8> out;
  for (int c = 0; c < 8; ++c) {
    Vec3 p = center;
    for (int a = 0; a < 3; ++a) {
      const double sign = (c >> a) & 1 ? 1.0 : -1.0;
      p += (sign * dilation * half_widths[a]) * axes[a];
    }
    out[c] = p;
  }
  return out;
}

double OrientedBox::distance_to_origin() const {
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double u = -dot(center, axes[a]);
    const double excess = std::max(0.0, std::abs(u) - half_widths[a]);
    sq += excess * excess;
  }
  return std::sqrt(sq);
}

std::array<Vec3, 3> cone_frame(double phi, ConeSide side) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  const Vec3 tangent{-s, c, 0.0};
  Vec3 generator = Vec3{c, s, 1.0} / kSqrt2;
  Vec3 normal = Vec3{c, s, -1.0} / kSqrt2;
  if (side == ConeSide::backward) {
    generator = -generator;
    normal = -normal;
  }
  return {tangent, generator, normal};
}

// ---------------------------------------------------------------- caps

namespace {

int slot_count(double scale) {
  return std::max(4, static_cast<int>(std::ceil(kPi * scale - 1e-12)));
}

double side_angle(double phi, ConeSide side) {
  return side == ConeSide::forward ? wrap_angle(phi) : wrap_angle(phi + kPi);
}

}  // namespace

std::vector<StandardCap> standard_caps_at_scale(double scale) {
  if (!(scale >= 1.0)) throw PreconditionError("standard caps need scale K ≥ 1");
  const int slots = slot_count(scale);
  std::vector<StandardCap> out;
  out.reserve(2 * static_cast<std::size_t>(slots));
  for (ConeSide side : {ConeSide::forward, ConeSide::backward}) {
    for (int i = 0; i < slots; ++i) {
      const double phi = kTwoPi * (i + 0.5) / slots;
      StandardCap cap;
      cap.side = side;
      cap.angle = side_angle(phi, side);
      cap.box.axes = cone_frame(phi, side);
      cap.box.center = 0.75 * cap.box.axes[1];
      cap.box.half_widths = {1.0 / scale, 0.5, 1.5 / (scale * scale)};
      out.push_back(cap);
    }
  }
  return out;
}

std::vector<StandardCap> standard_caps(int K) {
  if (K < 2) throw PreconditionError("standard_caps needs integer K ≥ 2");
  return standard_caps_at_scale(static_cast<double>(K));
}

int cap_slot_count(int k) { return slot_count(std::exp2(0.5 * k)); }

std::vector<Cap> build_caps(int j, int k) {
  if (k < 0 || k > j) throw PreconditionError("build_caps needs 0 ≤ k ≤ j");
  if (j > 60) throw PreconditionError("build_caps: j out of range");
  const int slots = cap_slot_count(k);
  const double radius = std::exp2(j);
  const double shell = std::exp2(j - k);
  std::vector<double> offsets = k < j ? std::vector<double>{0.75 * shell, -0.75 * shell}
                                      : std::vector<double>{0.0};
  const double normal_hw = k < j ? 0.25 * shell : 1.5;
  const double radial_hw = k < j ? 0.25 * radius : 0.25 * radius + std::min(1.0, 0.25 * radius);
  std::vector<Cap> out;
  for (ConeSide side : {ConeSide::forward, ConeSide::backward}) {
    for (int i = 0; i < slots; ++i) {
      const double phi = kTwoPi * (i + 0.5) / slots;
      const auto axes = cone_frame(phi, side);
      for (double offset : offsets) {
        Cap cap;
        cap.j = j;
        cap.k = k;
        cap.index = i;
        cap.layer = offset > 0 ? 1 : (offset < 0 ? -1 : 0);
        cap.side = side;
        cap.angle = side_angle(phi, side);
        cap.star_angle = side == ConeSide::forward ? wrap_angle(kPi + cap.angle) : cap.angle;
        cap.box.axes = axes;
        cap.box.center = (0.75 * radius) * axes[1] + offset * axes[2];
        cap.box.half_widths = {0.75 * std::exp2(j - 0.5 * k), radial_hw, normal_hw};
        out.push_back(cap);
      }
    }
  }
  return out;
}

int resolvable_j_max(const GridSpec& grid) {
  grid.validate();
  const double band = grid.nyquist() / 4.0;
  if (band < 1.0) return -1;
  return static_cast<int>(std::floor(std::log2(band) + 1e-12));
}

std::vector<Cap> build_caps(int j, int k, const GridSpec& grid) {
  const int jmax = resolvable_j_max(grid);
  if (j > jmax) {
    throw ResolutionError("cap level j=" + std::to_string(j) + " exceeds the grid's j_max=" +
                          std::to_string(jmax));
  }
  return build_caps(j, k);
}

// ---------------------------------------------------------------- parameters

double PacketParams::alpha_star() const {
  return std::max(alpha / 3.0 + 1.0, alpha - 0.5) - eps;
}

void PacketParams::validate() const {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("eps must lie in (0, 1)");
  if (!(delta > 0.0)) throw PreconditionError("delta must be positive");
  if (delta > eps * eps) throw PreconditionError("delta must satisfy delta ≤ eps²");
  if (J < 1) throw PreconditionError("J must be ≥ 1");
  if (!(alpha > 0.0 && alpha <= 3.0)) throw PreconditionError("alpha must lie in (0, 3]");
}

double bad_threshold(int j, int k, const PacketParams& params) {
  return 100.0 * std::exp2(0.5 * k * (100.0 * params.delta - params.alpha_star())) *
         std::exp2(-params.alpha * (j - k));
}

// ---------------------------------------------------------------- tubes

std::array<double, 3> tube_half_widths(int j, int k, double delta) {
  const double thin = std::exp2(-j + k * (0.5 + delta));
  return {thin, thin, 10.0 * std::exp2(-(j - k) + k * delta)};
}

std::vector<Tube> build_tubes(const Cap& cap, double delta, double radius) {
  if (!(delta > 0.0)) throw PreconditionError("build_tubes needs delta > 0");
  const auto hw = tube_half_widths(cap.j, cap.k, delta);
  std::array<long, 3> reach{};
  double total = 1.0;
  for (int a = 0; a < 3; ++a) {
    reach[a] = static_cast<long>(std::floor((radius + hw[a]) / (2.0 * hw[a])));
    total *= 2.0 * static_cast<double>(reach[a]) + 1.0;
  }
  if (total > static_cast<double>(1 << 25)) {
    throw ResourceError("tube lattice too large: " + std::to_string(total) + " candidates");
  }
  std::vector<Tube> out;
  for (long a = -reach[0]; a <= reach[0]; ++a) {
    for (long b = -reach[1]; b <= reach[1]; ++b) {
      for (long c = -reach[2]; c <= reach[2]; ++c) {
        Tube t;
        t.j = cap.j;
        t.k = cap.k;
        t.lattice = {a, b, c};
        t.box.axes = cap.box.axes;
        t.box.half_widths = hw;
        t.box.center = (2.0 * a * hw[0]) * cap.box.axes[0] + (2.0 * b * hw[1]) * cap.box.axes[1] +
                       (2.0 * c * hw[2]) * cap.box.axes[2];
        if (t.box.distance_to_origin() <= radius) out.push_back(t);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- tube masses

namespace {

long bin_of(double u, double h) { return static_cast<long>(std::floor(2.0 * u / h + 2.0)); }

}  // namespace

TubeMassCounter::TubeMassCounter(std::array<Vec3, 3> axes, std::array<double, 3> half_widths,
                                 std::span<const Vec3> points, std::span<const double> masses)
    : axes_(axes), half_widths_(half_widths) {
  if (points.size() != masses.size()) throw PreconditionError("points and masses differ in size");
  std::vector<std::array<long, 3>> bins(points.size());
  std::array<long, 3> lo{0, 0, 0};
  std::array<long, 3> hi{0, 0, 0};
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      bins[i][a] = bin_of(dot(points[i], axes_[a]), half_widths_[a]);
      if (i == 0 || bins[i][a] < lo[a]) lo[a] = bins[i][a];
      if (i == 0 || bins[i][a] > hi[a]) hi[a] = bins[i][a];
    }
  }
  double cells = 1.0;
  for (int a = 0; a < 3; ++a) {
    origin_[a] = lo[a];
    extent_[a] = points.empty() ? 0 : hi[a] - lo[a] + 1;
    cells *= static_cast<double>(extent_[a] + 1);
  }
  if (cells > static_cast<double>(1 << 27)) {
    throw ResourceError("tube mass histogram too large: " + std::to_string(cells) + " bins");
  }
  const long ny = extent_[1] + 1;
  const long nz = extent_[2] + 1;
  prefix_.assign(static_cast<std::size_t>((extent_[0] + 1) * ny * nz), 0.0);
  auto at = [&](long x, long y, long z) -> double& {
    return prefix_[static_cast<std::size_t>((x * ny + y) * nz + z)];
  };
  for (std::size_t i = 0; i < points.size(); ++i) {
    at(bins[i][0] - lo[0] + 1, bins[i][1] - lo[1] + 1, bins[i][2] - lo[2] + 1) += masses[i];
  }
  for (long x = 1; x <= extent_[0]; ++x) {
    for (long y = 1; y <= extent_[1]; ++y) {
      for (long z = 1; z <= extent_[2]; ++z) {
        at(x, y, z) += at(x - 1, y, z) + at(x, y - 1, z) + at(x, y, z - 1) - at(x - 1, y - 1, z) -
                       at(x - 1, y, z - 1) - at(x, y - 1, z - 1) + at(x - 1, y - 1, z - 1);
      }
    }
  }
}

double TubeMassCounter::box_sum(std::array<long, 3> lo, std::array<long, 3> hi) const {
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::clamp(lo[a] - origin_[a], 0L, extent_[a]);
    hi[a] = std::clamp(hi[a] - origin_[a], 0L, extent_[a]);
    if (hi[a] <= lo[a]) return 0.0;
  }
  const long ny = extent_[1] + 1;
  const long nz = extent_[2] + 1;
  auto at = [&](long x, long y, long z) {
    return prefix_[static_cast<std::size_t>((x * ny + y) * nz + z)];
  };
  return at(hi[0], hi[1], hi[2]) - at(lo[0], hi[1], hi[2]) - at(hi[0], lo[1], hi[2]) -
         at(hi[0], hi[1], lo[2]) + at(lo[0], lo[1], hi[2]) + at(lo[0], hi[1], lo[2]) +
         at(hi[0], lo[1], lo[2]) - at(lo[0], lo[1], lo[2]);
}

double TubeMassCounter::mass(const std::array<long, 3>& lattice, int dilation) const {
  if (dilation < 1) throw PreconditionError("tube dilation must be a positive integer");
  std::array<long, 3> lo{};
  std::array<long, 3> hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = 4 * lattice[a] - 2 * dilation + 2;
    hi[a] = 4 * lattice[a] + 2 * dilation + 2;
  }
  return box_sum(lo, hi);
}

namespace {

TubeClassification classify_points(std::span<const Vec3> points, std::span<const double> masses,
                                   std::vector<Tube> tubes, const PacketParams& params) {
  params.validate();
  TubeClassification out;
  out.alpha_star = params.alpha_star();
  if (tubes.empty()) {
    out.tubes = std::move(tubes);
    return out;
  }
  const Tube& first = tubes.front();
  for (const Tube& t : tubes) {
    if (t.j != first.j || t.k != first.k || dot(t.box.axes[2], first.box.axes[2]) < 1.0 - 1e-12) {
      throw PreconditionError("classify_tubes expects tubes of a single cap");
    }
  }
  out.threshold = bad_threshold(first.j, first.k, params);
  const TubeMassCounter counter(first.box.axes, first.box.half_widths, points, masses);
  for (Tube& t : tubes) {
    t.mass_10T = counter.mass(t.lattice, 10);
    t.cls = t.mass_10T >= out.threshold ? TubeClass::bad : TubeClass::good;
    if (t.cls == TubeClass::bad) {
      ++out.bad_count;
      out.bad_mass += t.mass_10T;
    }
  }
  out.tubes = std::move(tubes);
  return out;
}

struct CellCloud {
  std::vector<Vec3> points;
  std::vector<double> masses;
};

CellCloud cell_cloud(const GridField& mu) {
  if (mu.space() != Space::spatial) throw PreconditionError("expected a spatial field");
  CellCloud cloud;
  const std::size_t n = mu.n();
  const double vol = mu.cell_volume();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const double v = mu.at(i, j, k).real();
        if (v == 0.0) continue;
        cloud.points.push_back(mu.point(i, j, k));
        cloud.masses.push_back(v * vol);
      }
    }
  }
  return cloud;
}

}  // namespace

TubeClassification classify_tubes(const AtomicMeasure& mu, std::vector<Tube> tubes,
                                  const PacketParams& params) {
  if (mu.dim() != 3) throw PreconditionError("classify_tubes needs a measure on R^3");
  std::vector<Vec3> points(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) points[i] = mu.vec3(i);
  return classify_points(points, mu.weights(), std::move(tubes), params);
}

TubeClassification classify_tubes(const GridField& mu, std::vector<Tube> tubes,
                                  const PacketParams& params) {
  const CellCloud cloud = cell_cloud(mu);
  return classify_points(cloud.points, cloud.masses, std::move(tubes), params);
}

// ---------------------------------------------------------------- windows

double smooth_cutoff(double u, double inner, double outer) {
  u = std::abs(u);
  if (u <= inner) return 1.0;
  if (u >= outer) return 0.0;
  const double s = (u - inner) / (outer - inner);
  const double step = s * s * (3.0 - 2.0 * s);
  return 0.5 * (1.0 + std::cos(kPi * step));
}

namespace {

constexpr double kCapTransition = 1.1;
constexpr double kTubeTransition = 2.0;

// Storage index of a signed FFT index.
std::size_t wrap_index(long m, std::size_t n) {
  const long nn = static_cast<long>(n);
  return static_cast<std::size_t>(((m % nn) + nn) % nn);
}

// Visits frequency samples inside the bounding box of 1.1τ.
template <class Fn>
void for_each_in_cap(const GridSpec& grid, const Cap& cap, Fn&& fn) {
  const auto corners = cap.box.corners(kCapTransition);
  const double step = grid.freq_step();
  const long half = static_cast<long>(grid.n / 2);
  std::array<long, 3> lo{};
  std::array<long, 3> hi{};
  for (int a = 0; a < 3; ++a) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn;
    for (const Vec3& c : corners) {
      const double v = a == 0 ? c.x : (a == 1 ? c.y : c.z);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    lo[a] = static_cast<long>(std::ceil(mn / step));
    hi[a] = static_cast<long>(std::floor(mx / step));
    if (lo[a] < -half || hi[a] >= half) {
      throw ResolutionError("cap (j=" + std::to_string(cap.j) + ", k=" + std::to_string(cap.k) +
                            ") exceeds the frequency band of the grid");
    }
  }
  for (long a = lo[0]; a <= hi[0]; ++a) {
    for (long b = lo[1]; b <= hi[1]; ++b) {
      for (long c = lo[2]; c <= hi[2]; ++c) {
        const Vec3 xi{a * step, b * step, c * step};
        const std::size_t flat =
            (wrap_index(a, grid.n) * grid.n + wrap_index(b, grid.n)) * grid.n +
            wrap_index(c, grid.n);
        fn(flat, xi);
      }
    }
  }
}

// Σ_i of the raw tube profile over the lattice along one axis.
double lattice_profile_sum(double u, double h) {
  const double q = u / (2.0 * h);
  const long base = static_cast<long>(std::floor(q));
  double sum = 0.0;
  for (long i = base; i <= base + 1; ++i) {
    sum += smooth_cutoff((u - 2.0 * i * h) / h, 1.0, kTubeTransition);
  }
  return sum;
}

}  // namespace

PacketCover::PacketCover(GridSpec grid, PacketParams params)
    : grid_(grid), params_(params) {
  grid_.validate();
  params_.validate();
  j_max_ = resolvable_j_max(grid_);
  if (j_max_ < params_.J) {
    throw ResolutionError("grid resolves j_max=" + std::to_string(j_max_) + " below J=" +
                          std::to_string(params_.J));
  }
  for (int j = params_.J; j <= j_max_; ++j) {
    for (int k = 0; k <= j; ++k) {
      auto level = build_caps(j, k);
      caps_.insert(caps_.end(), level.begin(), level.end());
    }
  }
  window_sum_.assign(grid_.n * grid_.n * grid_.n, 0.0);
  for (const Cap& cap : caps_) {
    for_each_in_cap(grid_, cap, [&](std::size_t flat, Vec3 xi) {
      window_sum_[flat] += raw_cap_window(cap, xi);
    });
  }
}

double PacketCover::raw_cap_window(const Cap& cap, Vec3 xi) {
  const auto u = cap.box.local(xi);
  double w = 1.0;
  for (double v : u) {
    w *= smooth_cutoff(v, 1.0, kCapTransition);
    if (w == 0.0) break;
  }
  return w;
}

double PacketCover::raw_window_sum(Vec3 xi) const {
  double sum = 0.0;
  for (const Cap& cap : caps_) sum += raw_cap_window(cap, xi);
  return sum;
}

double PacketCover::cap_window(const Cap& cap, Vec3 xi) const {
  const double raw = raw_cap_window(cap, xi);
  if (raw == 0.0) return 0.0;
  return raw / raw_window_sum(xi);
}

double PacketCover::partition_sum(Vec3 xi) const {
  const double total = raw_window_sum(xi);
  if (total == 0.0) return 0.0;
  double sum = 0.0;
  for (const Cap& cap : caps_) sum += raw_cap_window(cap, xi) / total;
  return sum;
}

GridField PacketCover::cap_window_field(const Cap& cap) const {
  GridField out(grid_, Space::frequency);
  for_each_in_cap(grid_, cap, [&](std::size_t flat, Vec3 xi) {
    const double raw = raw_cap_window(cap, xi);
    if (raw > 0.0) out[flat] = raw / window_sum_[flat];
  });
  return out;
}

double PacketCover::tube_window(const Cap& cap, const Tube& tube, Vec3 x) {
  double w = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double h = tube.box.half_widths[a];
    const double u = dot(x, cap.box.axes[a]);
    const double raw = smooth_cutoff((u - 2.0 * tube.lattice[a] * h) / h, 1.0, kTubeTransition);
    if (raw == 0.0) return 0.0;
    w *= raw / lattice_profile_sum(u, h);
  }
  return w;
}

void PacketCover::check_field(const GridField& f) const {
  if (f.space() != Space::spatial) throw PreconditionError("wave packets act on spatial fields");
  if (f.spec().n != grid_.n || f.spec().half_width != grid_.half_width) {
    throw PreconditionError("field grid differs from the cover's grid");
  }
}

namespace {

GridField band_from_spectrum(const GridField& spectrum, const GridSpec& grid, const Cap& cap,
                             const std::vector<double>& window_sum) {
  GridField filtered(grid, Space::frequency);
  for_each_in_cap(grid, cap, [&](std::size_t flat, Vec3 xi) {
    const double raw = PacketCover::raw_cap_window(cap, xi);
    if (raw > 0.0) filtered[flat] = spectrum[flat] * (raw / window_sum[flat]);
  });
  return to_spatial(filtered);
}

}  // namespace

GridField PacketCover::band(const GridField& f, const Cap& cap) const {
  check_field(f);
  return band_from_spectrum(to_frequency(f), grid_, cap, window_sum_);
}

GridField PacketCover::apply_wave_packet(const GridField& f, const Cap& cap,
                                         const Tube& tube) const {
  GridField out = band(f, cap);
  const std::size_t n = grid_.n;
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        out.at(i, j, k) *= tube_window(cap, tube, out.point(i, j, k));
      }
    }
  });
  return out;
}

double packet_leakage(const GridField& packet, const Cap& cap, double dilation) {
  const GridField spectrum = to_frequency(packet);
  const std::size_t n = spectrum.n();
  double total = 0.0;
  double outside = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::norm(spectrum.at(i, j, k));
        total += e;
        if (!cap.box.contains(spectrum.point(i, j, k), dilation)) outside += e;
      }
    }
  }
  return total > 0.0 ? outside / total : 0.0;
}

// ---------------------------------------------------------------- good/bad

namespace {

// Dense view of one cap's tube lattice over the indices whose 2T can meet the grid.
struct LatticeView {
  std::array<double, 3> hw{};
  std::array<long, 3> lo{};
  std::array<long, 3> size{};
  std::vector<unsigned char> in_cover;
  std::vector<unsigned char> bad;

  std::size_t flat(const std::array<long, 3>& idx) const {
    return static_cast<std::size_t>(((idx[0] - lo[0]) * size[1] + (idx[1] - lo[1])) * size[2] +
                                     (idx[2] - lo[2]));
  }
  bool inside(const std::array<long, 3>& idx) const {
    for (int a = 0; a < 3; ++a) {
      if (idx[a] < lo[a] || idx[a] >= lo[a] + size[a]) return false;
    }
    return true;
  }
  std::size_t count() const { return static_cast<std::size_t>(size[0] * size[1] * size[2]); }
};

LatticeView lattice_view(const Cap& cap, const GridSpec& grid, double delta) {
  LatticeView view;
  view.hw = tube_half_widths(cap.j, cap.k, delta);
  const double reach = std::sqrt(3.0) * grid.half_width;
  for (int a = 0; a < 3; ++a) {
    const long m = static_cast<long>(std::ceil(reach / (2.0 * view.hw[a]))) + 1;
    view.lo[a] = -m;
    view.size[a] = 2 * m + 1;
  }
  view.in_cover.assign(view.count(), 0);
  view.bad.assign(view.count(), 0);
  for (long a = 0; a < view.size[0]; ++a) {
    for (long b = 0; b < view.size[1]; ++b) {
      for (long c = 0; c < view.size[2]; ++c) {
        const std::array<long, 3> idx{a + view.lo[0], b + view.lo[1], c + view.lo[2]};
        OrientedBox box;
        box.axes = cap.box.axes;
        box.half_widths = view.hw;
        box.center = (2.0 * idx[0] * view.hw[0]) * box.axes[0] +
                     (2.0 * idx[1] * view.hw[1]) * box.axes[1] +
                     (2.0 * idx[2] * view.hw[2]) * box.axes[2];
        view.in_cover[view.flat(idx)] = box.distance_to_origin() <= 2.0 ? 1 : 0;
      }
    }
  }
  return view;
}

struct CapAssembly {
  double packet_constant = 0.0;
};

// Adds Σ_{bad T} η_T·(ψ_τ μ̂)ˇ into mu_b; optionally returns max ‖M_T μ‖₁/(μ(2T)+2^{−4k}).
CapAssembly assemble_cap(const GridField& spectrum, const GridSpec& grid, const Cap& cap,
                         const std::vector<double>& window_sum, const LatticeView& view,
                         bool any_bad, const TubeMassCounter* audit, GridField& mu_b) {
  CapAssembly result;
  if (!any_bad && audit == nullptr) return result;
  const GridField g = band_from_spectrum(spectrum, grid, cap, window_sum);
  const std::size_t n = grid.n;
  const double vol = g.cell_volume();
  std::vector<std::vector<double>> l1(n);
  parallel_for(n, [&](std::size_t i) {
    if (audit != nullptr) l1[i].assign(view.count(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        const Vec3 x = g.point(i, j, k);
        const cplx value = g.at(i, j, k);
        std::array<std::array<long, 2>, 3> cand{};
        std::array<std::array<double, 2>, 3> weight{};
        for (int a = 0; a < 3; ++a) {
          const double h = view.hw[a];
          const double u = dot(x, cap.box.axes[a]);
          const long base = static_cast<long>(std::floor(u / (2.0 * h)));
          for (int c = 0; c < 2; ++c) {
            cand[a][c] = base + c;
            weight[a][c] = smooth_cutoff((u - 2.0 * cand[a][c] * h) / h, 1.0, kTubeTransition);
          }
          const double norm = weight[a][0] + weight[a][1];
          weight[a][0] /= norm;
          weight[a][1] /= norm;
        }
        cplx bad_sum = 0.0;
        for (int c0 = 0; c0 < 2; ++c0) {
          for (int c1 = 0; c1 < 2; ++c1) {
            for (int c2 = 0; c2 < 2; ++c2) {
              const double eta = weight[0][c0] * weight[1][c1] * weight[2][c2];
              if (eta == 0.0) continue;
              const std::array<long, 3> idx{cand[0][c0], cand[1][c1], cand[2][c2]};
              if (!view.inside(idx)) continue;
              const std::size_t f = view.flat(idx);
              if (!view.in_cover[f]) continue;
              if (view.bad[f]) bad_sum += eta;
              if (audit != nullptr) l1[i][f] += eta * std::abs(value) * vol;
            }
          }
        }
        if (bad_sum != 0.0) mu_b.at(i, j, k) += bad_sum * value;
      }
    }
  });
  if (audit != nullptr) {
    const double tail = std::exp2(-4.0 * cap.k);
    for (std::size_t f = 0; f < view.count(); ++f) {
      if (!view.in_cover[f]) continue;
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += l1[i][f];
      const long c = static_cast<long>(f % view.size[2]);
      const long b = static_cast<long>((f / view.size[2]) % view.size[1]);
      const long a = static_cast<long>(f / (view.size[2] * view.size[1]));
      const std::array<long, 3> idx{a + view.lo[0], b + view.lo[1], c + view.lo[2]};
      const double ratio = norm / (audit->mass(idx, 2) + tail);
      result.packet_constant = std::max(result.packet_constant, ratio);
    }
  }
  return result;
}

int first_k(int j, double eps) { return static_cast<int>(std::ceil(j * eps - 1e-12)); }

void require_levels(const PacketCover& cover) {
  if (cover.j_max() < cover.params().J + 2) {
    throw ResolutionError("grid resolves j_max=" + std::to_string(cover.j_max()) +
                          "; decomposition needs j_max ≥ J+2");
  }
}

}  // namespace

std::vector<std::vector<Tube>> bad_tubes_by_cap(const GridField& mu, const PacketCover& cover) {
  const CellCloud cloud = cell_cloud(mu);
  const auto& caps = cover.caps();
  std::vector<std::vector<Tube>> out(caps.size());
  for (std::size_t c = 0; c < caps.size(); ++c) {
    const Cap& cap = caps[c];
    if (cap.k < first_k(cap.j, cover.params().eps)) continue;
    auto cls = classify_points(cloud.points, cloud.masses,
                               build_tubes(cap, cover.params().delta), cover.params());
    for (Tube& t : cls.tubes) {
      if (t.cls == TubeClass::bad) out[c].push_back(t);
    }
  }
  return out;
}

GoodBadDecomposition decompose_with_classes(const GridField& mu, const PacketCover& cover,
                                            const std::vector<std::vector<Tube>>& bad_tubes) {
  if (mu.space() != Space::spatial) throw PreconditionError("decompose needs a spatial field");
  require_levels(cover);
  const auto& caps = cover.caps();
  if (bad_tubes.size() != caps.size()) throw PreconditionError("one bad-tube list per cap needed");
  GoodBadDecomposition out;
  out.mu_b = GridField(mu.spec(), Space::spatial);
  const GridField spectrum = to_frequency(mu);
  const std::vector<double>& window_sum = cover.window_sum();
  for (std::size_t c = 0; c < caps.size(); ++c) {
    if (bad_tubes[c].empty()) continue;
    LatticeView view = lattice_view(caps[c], cover.grid(), cover.params().delta);
    for (const Tube& t : bad_tubes[c]) {
      if (view.inside(t.lattice)) view.bad[view.flat(t.lattice)] = 1;
    }
    assemble_cap(spectrum, cover.grid(), caps[c], window_sum, view, true, nullptr, out.mu_b);
  }
  out.mu_g = mu;
  out.mu_g -= out.mu_b;
  return out;
}

GoodBadDecomposition decompose_good_bad(const GridField& mu, const PacketParams& params,
                                        const GoodBadOptions& options) {
  if (mu.space() != Space::spatial) throw PreconditionError("decompose needs a spatial field");
  const PacketCover cover(mu.spec(), params);
  require_levels(cover);
  const CellCloud cloud = cell_cloud(mu);
  const GridField spectrum = to_frequency(mu);
  const std::vector<double>& window_sum = cover.window_sum();
  GoodBadDecomposition out;
  out.mu_b = GridField(mu.spec(), Space::spatial);
  for (int j = params.J; j <= cover.j_max(); ++j) {
    for (int k = first_k(j, params.eps); k <= j; ++k) {
      GoodBadLedgerRow row;
      row.j = j;
      row.k = k;
      row.threshold = bad_threshold(j, k, params);
      for (const Cap& cap : cover.caps()) {
        if (cap.j != j || cap.k != k) continue;
        ++row.caps;
        LatticeView view = lattice_view(cap, cover.grid(), params.delta);
        const TubeMassCounter counter(cap.box.axes, view.hw, cloud.points, cloud.masses);
        bool any_bad = false;
        for (const Tube& t : build_tubes(cap, params.delta)) {
          ++row.tubes;
          const double m10 = counter.mass(t.lattice, 10);
          if (m10 >= row.threshold) {
            any_bad = true;
            ++row.bad_count;
            row.bad_mass += m10;
            if (view.inside(t.lattice)) view.bad[view.flat(t.lattice)] = 1;
          }
        }
        const CapAssembly assembly =
            assemble_cap(spectrum, cover.grid(), cap, window_sum, view, any_bad,
                         options.audit_packets ? &counter : nullptr, out.mu_b);
        row.packet_constant = std::max(row.packet_constant, assembly.packet_constant);
      }
      out.ledger.push_back(row);
    }
  }
  out.mu_g = mu;
  out.mu_g -= out.mu_b;
  return out;
}

// ---------------------------------------------------------------- nonstationary phase

double nonstationary_required_gap(int k, double delta, double angle_constant) {
  return angle_constant * std::exp2(k * (-0.5 + delta));
}

NonstationaryResult nonstationary_check(const GridField& f, const PacketCover& cover,
                                        const Cap& cap, const Tube& tube, double theta,
                                        const NonstationaryOptions& options) {
  NonstationaryResult out;
  out.required_gap =
      nonstationary_required_gap(cap.k, cover.params().delta, options.angle_constant);
  out.angle_gap = angle_distance(cap.star_angle, theta);
  if (out.angle_gap < out.required_gap) {
    throw PreconditionError("angle gap " + std::to_string(out.angle_gap) +
                            " below the admissible " + std::to_string(out.required_gap) +
                            (out.required_gap > kPi ? " (no angle is admissible at this k)" : ""));
  }
  const GridField packet = cover.apply_wave_packet(f, cap, tube);
  GridField re(packet.spec(), Space::spatial);
  GridField im(packet.spec(), Space::spatial);
  for (std::size_t i = 0; i < packet.size(); ++i) {
    re[i] = packet[i].real();
    im[i] = packet[i].imag();
  }
  const auto curve = SphereCurve::model();
  const Density2D dre = pushforward_density(re, curve, theta, options.plane);
  const Density2D dim = pushforward_density(im, curve, theta, options.plane);
  const double area = dre.cell() * dre.cell();
  for (std::size_t i = 0; i < dre.values.size(); ++i) {
    out.observed += std::hypot(dre.values[i], dim.values[i]) * area;
  }
  out.reference = std::exp2(-static_cast<double>(cap.k) * options.decay_order) * f.l1_norm();
  out.ratio = out.reference > 0.0 ? out.observed / out.reference : 0.0;
  return out;
}

}  // namespace projlab
