#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "projlab/geometry.hpp"
#include "projlab/grid.hpp"
#include "projlab/measures.hpp"

namespace projlab {

// Atoms of a measure written in the frame {e1, e2} of the plane orthogonal to γ(θ).
struct ProjectedMeasure2D {
  std::vector<double> coords;  // interleaved (⟨x,e1⟩, ⟨x,e2⟩)
  std::vector<double> weights;
  PlaneFrame frame;
  double theta = 0.0;
  double total_mass = 0.0;

  std::size_t size() const { return weights.size(); }
  AtomicMeasure as_measure() const { return AtomicMeasure(2, coords, weights); }
};

ProjectedMeasure2D project_measure(const AtomicMeasure& mu, const SphereCurve& curve, double theta);

// Least-squares line through (log2 x, log2 y) restricted to indices [window_lo, window_hi).
struct DecayFit {
  std::vector<double> scales;
  std::vector<double> values;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t window_lo = 0;
  std::size_t window_hi = 0;
  bool degenerate = false;
};

DecayFit fit_loglog(std::vector<double> scales, std::vector<double> values, std::size_t window_lo,
                    std::size_t window_hi);

struct Density2D {
  std::size_t n = 0;
  double half_width = 0.0;
  std::vector<double> values;  // row-major n×n density on [−L, L)², sample at cell corners
  bool truncated = false;      // mass fell outside the 2D grid or the source touched its border

  double cell() const { return 2.0 * half_width / static_cast<double>(n); }
  double integral() const;
};

struct Grid2DSpec {
  std::size_t n = 128;
  double half_width = 2.0;
};

// Line integrals ∫ f(x + tγ(θ)) dt sampled on the plane grid (cell masses deposited bilinearly).
Density2D pushforward_density(const GridField& f, const SphereCurve& curve, double theta,
                              const Grid2DSpec& grid2d);

// Bilinear histogram of projected atoms on the same 2D grid layout.
Density2D histogram_density(const ProjectedMeasure2D& mu, const Grid2DSpec& grid2d);

struct BoxCountOptions {
  int max_level = 0;          // finest dyadic level; 0 picks it from the point count
  std::size_t discard_coarse = 2;
  std::size_t discard_fine = 2;
};

// Box counts N(2^{−ℓ}·side) over dyadic subdivisions of the bounding cube. DecayFit
// scales hold 2^ℓ (inverse box size) and values hold N.
DecayFit box_dimension(std::span<const double> coords, std::size_t dim,
                       const BoxCountOptions& options = {});
DecayFit box_dimension(const AtomicMeasure& mu, const BoxCountOptions& options = {});
DecayFit box_dimension(const ProjectedMeasure2D& mu, const BoxCountOptions& options = {});

struct EnergyDimensionOptions {
  int finest_level = 7;
  int increments = 5;  // energy increments I_ℓ − I_{ℓ−1} for the last this many levels
};

struct EnergyDimension {
  double value = 0.0;
  bool degenerate = false;
  std::vector<double> s_grid;
  std::vector<double> increment_ratio;  // per s: 2^{slope of log2(I_ℓ − I_{ℓ−1}) against ℓ}
};

// Energies I_ℓ of the measure coarse-grained to dyadic cells of level ℓ. Largest s
// whose increments shrink geometrically across levels (increment ratio below 1).
EnergyDimension energy_dimension(const ProjectedMeasure2D& mu, std::span<const double> s_grid,
                                 const EnergyDimensionOptions& options = {});
EnergyDimension energy_dimension(const AtomicMeasure& mu, std::span<const double> s_grid,
                                 const EnergyDimensionOptions& options = {});

enum class BoundKind { model_curve, curved_family, positive_area };

struct ScanConfig {
  double alpha = 2.0;          // dimension estimate of A
  double tolerance = 0.15;     // θ counts as below when dim_est < bound − tolerance
  double r2_threshold = 0.9;   // fits below are unreliable
  BoxCountOptions box;
};

struct ScanRow {
  double theta;
  double dim_est;
  double r2;
  double bound;
  double covered_area;  // N(δ)δ² at the finest window level
  bool reliable;
  bool below;
};

struct ScanReport {
  std::string curve;
  BoundKind bound_kind;
  double bound;
  std::vector<ScanRow> rows;
  std::size_t reliable_count = 0;
  double below_fraction = 0.0;
};

// Reference bound for the family: the model-curve bound inside (3/2, 5/2), the
// curved-family piecewise bound otherwise, and dimension 2 (positive area) above 5/2.
BoundKind scan_bound_kind(const SphereCurve& curve, double alpha);
double scan_bound(BoundKind kind, double alpha);

ScanReport theorem_scan(const AtomicMeasure& a, const SphereCurve& curve,
                        std::span<const double> thetas, const ScanConfig& config);

struct BadDirectionConfig {
  double delta = 1.0 / 64;
  double s = 2.0;
  double kappa = 0.5;
  double eta = 0.1;
  std::size_t thetas = 256;
  std::size_t max_samples = 4096;  // atoms used as test points y
};

struct BadDirectionReport {
  double threshold = 0.0;        // δ^{s−κ}
  double angle_threshold = 0.0;  // δ^η
  double set_mass = 0.0;         // estimated ν-mass of the bad set
  double ratio = 0.0;            // set_mass / (ν(ℝ³) δ^η)
  std::vector<double> thetas;
  std::vector<double> concentrated_fraction;  // per θ: sampled mass above threshold / sampled mass
  std::vector<std::size_t> sample_index;
  std::vector<double> angle_measure;          // per sampled atom
};

// Minimum admissible κ for exponent s (exclusive).
double kappa_floor(double s);

BadDirectionReport bad_direction_fraction(const AtomicMeasure& nu, const SphereCurve& curve,
                                          const BadDirectionConfig& config);

}  // namespace projlab
