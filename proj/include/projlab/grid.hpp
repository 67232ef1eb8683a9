#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "projlab/measures.hpp"
#include "projlab/vec.hpp"

namespace projlab {

using cplx = std::complex<double>;

enum class Space { spatial, frequency };

struct GridSpec {
  std::size_t n = 64;        // points per axis, power of two
  double half_width = 2.0;   // spatial domain [−L, L)³

  double cell() const { return 2.0 * half_width / static_cast<double>(n); }
  double freq_step() const { return 1.0 / (2.0 * half_width); }
  double nyquist() const { return static_cast<double>(n) * freq_step() / 2.0; }
  void validate() const;
};

// Complex field on an n³ grid. Spatial samples sit at x_i = −L + i·h; frequency
// samples at ξ_m = m/(2L) with m the signed FFT index, stored in FFT order.
class GridField {
 public:
  GridField() = default;
  GridField(GridSpec spec, Space space);

  const GridSpec& spec() const { return spec_; }
  Space space() const { return space_; }
  std::size_t n() const { return spec_.n; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * spec_.n + j) * spec_.n + k;
  }
  cplx& operator[](std::size_t flat) { return values_[flat]; }
  const cplx& operator[](std::size_t flat) const { return values_[flat]; }
  cplx& at(std::size_t i, std::size_t j, std::size_t k) { return values_[index(i, j, k)]; }
  const cplx& at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[index(i, j, k)];
  }

  std::vector<cplx>& values() { return values_; }
  const std::vector<cplx>& values() const { return values_; }

  // Spatial coordinate of sample index i, or frequency of FFT index i.
  double coord(std::size_t i) const;
  Vec3 point(std::size_t i, std::size_t j, std::size_t k) const {
    return {coord(i), coord(j), coord(k)};
  }
  // Signed FFT index of storage index i.
  long signed_index(std::size_t i) const;

  // Quadrature weight per sample (h³ spatially, Δξ³ in frequency).
  double cell_volume() const;

  double integral_real() const;  // Σ Re(v)·cell_volume
  double l1_norm() const;
  double l2_norm() const;

  GridField& operator+=(const GridField& other);
  GridField& operator-=(const GridField& other);
  GridField& operator*=(double s);

 private:
  GridSpec spec_;
  Space space_ = Space::spatial;
  std::vector<cplx> values_;
};

// Continuous Fourier transform with kernel e^{−2πi⟨ξ,x⟩}, discretized on the grid.
GridField to_frequency(const GridField& spatial);
// Inverse transform with kernel e^{+2πi⟨ξ,x⟩}.
GridField to_spatial(const GridField& frequency);

// Unit-mass-normalizable bump: 1 on the unit ball, 0 outside B(0,2), C^∞ in between.
double bump_profile(double r);

// ν ∗ φ_j with φ_j(x) = 2^{3j}φ(2^j x); each atom's bump is renormalized on the grid
// so the output integrates to the mass of ν.
GridField mollify(const AtomicMeasure& nu, int j, const GridSpec& grid);

// Discretization of ∫ |ξ|^{s−3} |μ̂(ξ)|² dξ for a real spatial density.
double fourier_energy(const GridField& density, double s);

// c in I_s(μ) = c ∫ |ξ|^{s−3}|μ̂|², namely π^{s−3/2} Γ((3−s)/2) / Γ(s/2).
double riesz_fourier_constant(double s);

// Exact I_s of the centered Gaussian with per-axis standard deviation sigma.
double gaussian_riesz_energy(double sigma, double s);

// Sampled normal density (unit mass) with per-axis standard deviation sigma.
GridField gaussian_density(const GridSpec& grid, double sigma, Vec3 center = {});

struct EnergyCalibration {
  double s;
  double constant;        // Riesz / Fourier ratio fitted on the reference Gaussian
  double analytic;        // riesz_fourier_constant(s)
  double reference_sigma;
};

// Calibrates the Riesz/Fourier constant once per s on a reference Gaussian; cached.
EnergyCalibration energy_calibration(double s, const GridSpec& grid = {});

// Container with a u32 space tag, u32 n and f64 L after the common header, then
// real and imaginary columns.
void write_grid(const std::string& path, const GridField& field,
                const std::string& sidecar_json = "{}");
GridField read_grid(const std::string& path);

}  // namespace projlab
