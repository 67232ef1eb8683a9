#include "projlab/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <tuple>

#include "binary_io.hpp"
#include "fft.hpp"
#include "projlab/errors.hpp"
#include "projlab/geometry.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

namespace detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void fft3_inplace(std::vector<std::complex<double>>& data, std::size_t n, int sign) {
  if (data.size() != n * n * n) throw std::logic_error("fft3_inplace: size mismatch");
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  const int nn = static_cast<int>(n);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_3d(nn, nn, nn, ptr, ptr, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  if (!plan) throw ResourceError("FFTW could not create a plan");
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace detail

void GridSpec::validate() const {
  if (n < 4 || (n & (n - 1)) != 0) throw PreconditionError("grid size must be a power of two >= 4");
  if (!(half_width > 0.0)) throw PreconditionError("grid half-width must be positive");
}

GridField::GridField(GridSpec spec, Space space) : spec_(spec), space_(space) {
  spec_.validate();
  values_.assign(spec_.n * spec_.n * spec_.n, cplx{});
}

long GridField::signed_index(std::size_t i) const {
  const long n = static_cast<long>(spec_.n);
  const long k = static_cast<long>(i);
  return k < n / 2 ? k : k - n;
}

double GridField::coord(std::size_t i) const {
  if (space_ == Space::spatial) return -spec_.half_width + spec_.cell() * static_cast<double>(i);
  return spec_.freq_step() * static_cast<double>(signed_index(i));
}

double GridField::cell_volume() const {
  const double d = space_ == Space::spatial ? spec_.cell() : spec_.freq_step();
  return d * d * d;
}

double GridField::integral_real() const {
  double s = 0.0;
  for (const auto& v : values_) s += v.real();
  return s * cell_volume();
}

double GridField::l1_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += std::abs(v);
  return s * cell_volume();
}

double GridField::l2_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += std::norm(v);
  return std::sqrt(s * cell_volume());
}

GridField& GridField::operator+=(const GridField& other) {
  if (other.size() != size() || other.space_ != space_) throw PreconditionError("grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridField& GridField::operator-=(const GridField& other) {
  if (other.size() != size() || other.space_ != space_) throw PreconditionError("grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridField& GridField::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

namespace {

// (−1)^{i+j+k} phase that shifts between the centered grid and FFT origin.
void apply_checkerboard(GridField& f) {
  const std::size_t n = f.n();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if ((i + j + k) & 1) f.at(i, j, k) = -f.at(i, j, k);
}

}  // namespace

GridField to_frequency(const GridField& spatial) {
  if (spatial.space() != Space::spatial) throw PreconditionError("field is not spatial");
  GridField out(spatial.spec(), Space::frequency);
  out.values() = spatial.values();
  detail::fft3_inplace(out.values(), out.n(), -1);
  apply_checkerboard(out);
  const double h = spatial.spec().cell();
  out *= h * h * h;
  return out;
}

GridField to_spatial(const GridField& frequency) {
  if (frequency.space() != Space::frequency) throw PreconditionError("field is not in frequency");
  GridField out(frequency.spec(), Space::spatial);
  out.values() = frequency.values();
  apply_checkerboard(out);
  detail::fft3_inplace(out.values(), out.n(), +1);
  const double d = frequency.spec().freq_step();
  out *= d * d * d;
  return out;
}

double bump_profile(double r) {
  r = std::abs(r);
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  auto psi = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double a = psi(2.0 - r);
  return a / (a + psi(r - 1.0));
}

GridField mollify(const AtomicMeasure& nu, int j, const GridSpec& grid) {
  grid.validate();
  if (nu.dim() != 3) throw PreconditionError("mollify needs a measure in R^3");
  const double h = grid.cell();
  const double scale = std::ldexp(1.0, -j);
  if (scale < 2.0 * h) {
    throw ResolutionError("mollifier scale 2^-" + std::to_string(j) + " is below twice the cell " +
                          std::to_string(h));
  }
  const double L = grid.half_width;
  double extent = 0.0;
  for (double c : nu.coords()) extent = std::max(extent, std::abs(c));
  if (extent + 2.0 * scale + 2.0 * h >= L) {
    throw PreconditionError("mollified support exceeds the grid domain");
  }

  // Trilinear deposit of the atoms.
  GridField field(grid, Space::spatial);
  const std::size_t n = grid.n;
  for (std::size_t a = 0; a < nu.size(); ++a) {
    const Vec3 p = nu.vec3(a);
    const double u[3] = {(p.x + L) / h, (p.y + L) / h, (p.z + L) / h};
    std::size_t base[3];
    double frac[3];
    for (int d = 0; d < 3; ++d) {
      const double fl = std::floor(u[d]);
      base[d] = static_cast<std::size_t>(fl);
      frac[d] = u[d] - fl;
    }
    for (int c = 0; c < 8; ++c) {
      double w = nu.weight(a);
      std::size_t idx[3];
      for (int d = 0; d < 3; ++d) {
        const bool up = (c >> d) & 1;
        w *= up ? frac[d] : 1.0 - frac[d];
        idx[d] = base[d] + (up ? 1 : 0);
      }
      field.at(idx[0], idx[1], idx[2]) += w;
    }
  }

  // Discrete kernel on wrapped offsets, normalized to unit sum.
  std::vector<cplx> kernel(n * n * n);
  double ksum = 0.0;
  const long half = static_cast<long>(n) / 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t jj = 0; jj < n; ++jj)
      for (std::size_t k = 0; k < n; ++k) {
        auto off = [&](std::size_t q) {
          const long s = static_cast<long>(q);
          return static_cast<double>(s < half ? s : s - static_cast<long>(n)) * h;
        };
        const double r = std::sqrt(off(i) * off(i) + off(jj) * off(jj) + off(k) * off(k));
        const double v = bump_profile(r / scale);
        kernel[(i * n + jj) * n + k] = v;
        ksum += v;
      }
  for (auto& v : kernel) v /= ksum;

  detail::fft3_inplace(kernel, n, -1);
  detail::fft3_inplace(field.values(), n, -1);
  for (std::size_t i = 0; i < kernel.size(); ++i) field[i] *= kernel[i];
  detail::fft3_inplace(field.values(), n, +1);
  const double inv = 1.0 / (static_cast<double>(n) * n * n * h * h * h);
  double peak = 0.0;
  for (const auto& v : field.values()) peak = std::max(peak, v.real() * inv);
  // Round-off floor of the convolution; keeps the support compact.
  const double floor = 1e-13 * peak;
  for (auto& v : field.values()) {
    const double x = v.real() * inv;
    v = cplx(x > floor ? x : 0.0, 0.0);
  }
  return field;
}

double riesz_fourier_constant(double s) {
  if (!(s > 0.0 && s < 3.0)) throw DomainError("Riesz exponent must lie in (0, 3)");
  return std::pow(kPi, s - 1.5) * std::tgamma((3.0 - s) / 2.0) / std::tgamma(s / 2.0);
}

double gaussian_riesz_energy(double sigma, double s) {
  if (!(s > 0.0 && s < 3.0)) throw DomainError("Riesz exponent must lie in (0, 3)");
  const double tau = kSqrt2 * sigma;
  return std::pow(tau, -s) * std::pow(2.0, -s / 2.0) * std::tgamma((3.0 - s) / 2.0) /
         std::tgamma(1.5);
}

double fourier_energy(const GridField& density, double s) {
  if (density.space() != Space::spatial) throw PreconditionError("fourier_energy needs a spatial field");
  if (!(s > 0.0)) throw DomainError("energy exponent must be positive");
  if (s >= 3.0) throw DomainError("energy exponent must be below the ambient dimension 3");
  double peak = 0.0;
  for (const auto& v : density.values()) peak = std::max(peak, std::abs(v));
  for (const auto& v : density.values()) {
    if (std::abs(v.imag()) > 1e-12 * (peak + 1e-300) || v.real() < -1e-12 * peak) {
      throw PreconditionError("fourier_energy needs a nonnegative real density");
    }
  }
  const GridField hat = to_frequency(density);
  const std::size_t n = hat.n();
  const double dxi = hat.spec().freq_step();
  const double cell = dxi * dxi * dxi;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = hat.coord(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double yj = hat.coord(j);
      for (std::size_t k = 0; k < n; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const double zk = hat.coord(k);
        const double r2 = xi * xi + yj * yj + zk * zk;
        sum += std::pow(r2, 0.5 * (s - 3.0)) * std::norm(hat.at(i, j, k));
      }
    }
  }
  sum *= cell;
  // Zero cell: integrate |ξ|^{s−3} over the ball with the cell's volume.
  const double rho = std::cbrt(3.0 / (4.0 * kPi)) * dxi;
  sum += 4.0 * kPi * std::pow(rho, s) / s * std::norm(hat.at(0, 0, 0));
  return sum;
}

GridField gaussian_density(const GridSpec& grid, double sigma, Vec3 center) {
  if (!(sigma > 0.0)) throw PreconditionError("sigma must be positive");
  GridField f(grid, Space::spatial);
  const std::size_t n = grid.n;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) {
        const Vec3 d = f.point(i, j, k) - center;
        const double v = std::exp(-dot(d, d) / (2.0 * sigma * sigma));
        f.at(i, j, k) = v;
        total += v;
      }
  f *= 1.0 / (total * f.cell_volume());
  return f;
}

EnergyCalibration energy_calibration(double s, const GridSpec& grid) {
  static std::mutex mutex;
  static std::map<std::tuple<double, std::size_t, double>, EnergyCalibration> cache;
  const auto key = std::make_tuple(s, grid.n, grid.half_width);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  constexpr double kReferenceSigma = 0.15;
  const double fe = fourier_energy(gaussian_density(grid, kReferenceSigma), s);
  EnergyCalibration cal{s, gaussian_riesz_energy(kReferenceSigma, s) / fe,
                        riesz_fourier_constant(s), kReferenceSigma};
  std::lock_guard lock(mutex);
  cache.emplace(key, cal);
  return cal;
}

void write_grid(const std::string& path, const GridField& field, const std::string& sidecar_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  detail::put_magic(out);
  detail::put<std::uint32_t>(out, kContainerVersion);
  detail::put<std::uint32_t>(out, 3);
  detail::put<std::uint64_t>(out, field.size());
  detail::put<std::uint32_t>(out, field.space() == Space::spatial ? 0u : 1u);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(field.n()));
  detail::put<double>(out, field.spec().half_width);
  for (const auto& v : field.values()) detail::put<double>(out, v.real());
  for (const auto& v : field.values()) detail::put<double>(out, v.imag());
  if (!out) throw std::runtime_error("write failed for " + path);
  detail::write_sidecar(path, sidecar_json);
}

GridField read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open grid file " + path);
  detail::expect_magic(in, path);
  if (detail::get<std::uint32_t>(in) != kContainerVersion) {
    throw PreconditionError("unsupported container version");
  }
  if (detail::get<std::uint32_t>(in) != 3) throw PreconditionError("grid file must be 3D");
  const auto count = detail::get<std::uint64_t>(in);
  const auto tag = detail::get<std::uint32_t>(in);
  const auto n = detail::get<std::uint32_t>(in);
  const double L = detail::get<double>(in);
  if (static_cast<std::uint64_t>(n) * n * n != count) throw PreconditionError("grid size mismatch");
  GridField f(GridSpec{n, L}, tag == 0 ? Space::spatial : Space::frequency);
  std::vector<double> re(count);
  for (auto& v : re) v = detail::get<double>(in);
  for (std::size_t i = 0; i < count; ++i) f[i] = cplx(re[i], detail::get<double>(in));
  return f;
}

}  // namespace projlab
