#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "projlab/cone_decomp.hpp"
#include "projlab/geometry.hpp"
#include "projlab/grid.hpp"
#include "projlab/measures.hpp"
#include "projlab/projections.hpp"

namespace projlab {

// ---------------------------------------------------------------------------
// Conical averages ∫_Ω ∫_{1/2}^1 |μ̂(Rρ G(y))|² dρ dy

struct ConicalQuadrature {
  std::size_t n_rho = 32;
  std::size_t n_y = 256;

  void validate() const;
};

// Tensor midpoint rule. Atoms: direct exponential sums, stepped along ρ by a geometric
// recurrence. Grid fields: trilinear interpolation of the FFT; ResolutionError when
// R reaches the Nyquist frequency.
double conical_average(const AtomicMeasure& mu, const SphereCurve& curve, double R,
                       const ConicalQuadrature& quadrature = {});
double conical_average(const GridField& mu, const SphereCurve& curve, double R,
                       const ConicalQuadrature& quadrature = {});

struct AverageSeries {
  std::vector<double> R;
  std::vector<double> values;
  // Richardson estimate |I(n) − I(n/2)|/3 of the midpoint error at each R.
  std::vector<double> quadrature_error;
  ConicalQuadrature quadrature;
};

AverageSeries conical_average_series(const AtomicMeasure& mu, const SphereCurve& curve,
                                     std::span<const double> radii,
                                     const ConicalQuadrature& quadrature = {});
AverageSeries conical_average_series(const GridField& mu, const SphereCurve& curve,
                                     std::span<const double> radii,
                                     const ConicalQuadrature& quadrature = {});

// Powers of two 2^lo .. 2^hi.
std::vector<double> dyadic_range(int lo, int hi);

struct BetaEstimate {
  double beta = 0.0;  // −slope of log2(average) against log2(R)
  DecayFit fit;
  bool flagged = false;  // r² below the threshold
};

// Needs ≥ 4 radii spanning ≥ 3 octaves and positive values (PreconditionError otherwise).
BetaEstimate beta_fit(const AverageSeries& series, double r2_threshold = 0.9);

enum class BetaFamily { cone_curve, vector_field };

// Known lower bound for the decay exponent. cone_curve needs d = 2; vector_field
// covers Γ^d for d ≥ 3. DomainError for α outside [0, d+1].
double beta_reference(double alpha, int d, BetaFamily family);

// ---------------------------------------------------------------------------
// Decoupling on the torus (ℝ/Pℤ)³

using LatticeFreq = std::array<long, 3>;

// Trigonometric polynomial Σ c·e^{2πi⟨n,x⟩/P} with integer frequency indices n.
struct TorusPiece {
  std::vector<LatticeFreq> freq;
  std::vector<cplx> coef;
};

// Pieces F_τ over the forward standard K⁻¹-caps, frequencies on (1/P)ℤ³ with P = K².
struct DecouplingSetup {
  int K = 0;
  long period = 0;
  std::vector<StandardCap> caps;
  std::vector<TorusPiece> pieces;  // pieces[i] lives in caps[i]
};

// per_cap distinct lattice frequencies in each cap (no frequency shared between caps),
// unit-modulus coefficients with seeded uniform phases.
DecouplingSetup random_phase_pieces(int K, int per_cap, std::uint64_t seed);

struct NormOptions {
  std::size_t mc_samples = 1 << 15;  // only for p ∉ {2, 4, 6}
  std::uint64_t seed = 7;
};

// Normalized L^p norm over one period. Exact for p = 2, 4, 6 (sums over frequency
// tuples), seeded Monte Carlo otherwise.
double torus_lp_norm(std::span<const TorusPiece> pieces, double p, const NormOptions& options = {});

// ‖Σ F_τ‖_p / (Σ ‖F_τ‖_p²)^{1/2}. PreconditionError when a frequency leaves its cap
// or p ∉ [2, 6].
double decoupling_ratio(const DecouplingSetup& setup, double p, const NormOptions& options = {});

struct DecouplingEnsemble {
  int K = 0;
  double p = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
};

DecouplingEnsemble decoupling_ensemble(int K, double p, std::size_t ensembles,
                                       std::uint64_t base_seed = 1, int per_cap = 4);

// ---------------------------------------------------------------------------
// Refined Strichartz experiment

// p(x) = [sin(2πhx)/(πx)]·[sinc(2hx)/(1 − (2hx)²)]: inverse transform of the indicator
// of [−h, h] convolved with the raised cosine of half-width h; supported in [−2h, 2h].
double packet_profile(double x, double h);
// The frequency-side profile.
double packet_profile_hat(double xi, double h);

struct WavePacket {
  Vec3 frequency;                   // center of θ(T)
  std::array<double, 3> freq_half_widths{};  // along tube.axes
  OrientedBox tube;                 // axes: tangential, generator, normal
  cplx amplitude{1.0, 0.0};

  cplx operator()(Vec3 x) const;
  double l2_norm() const;
  // Fraction of ‖f_T‖₂² outside T.
  double energy_outside_tube() const;
};

struct StrichartzParams {
  double R = 256.0;
  double delta = 0.05;
  int quadrature = 4;                 // midpoints per cube edge
  double support_threshold = 1e-4;
};

// Cap θ at angle φ on a sheet: center at generator length 3/4, frequency half-widths
// (2R^{−1/2}, 1/4, 2R^{−1}). Tube half-widths (R^{(1+δ)/2}, R^{(1+δ)/2}, 3R/2).
WavePacket make_wave_packet(double phi, ConeSide side, Vec3 tube_center, cplx amplitude,
                            const StrichartzParams& params);
// Angular slots per sheet at scale R^{−1/2}.
int strichartz_slot_count(double R);

struct PacketEnsemble {
  StrichartzParams params;
  std::vector<WavePacket> packets;
  double cube_side = 0.0;           // R^{1/2}
  std::vector<Vec3> cube_centers;   // Y
  std::size_t incidence = 1;        // M: max number of 2T meeting a cube, at least 1
};

// Lattice R^{1/2}-cubes inside B(0, R) that meet some 2T.
std::vector<Vec3> cubes_meeting_tubes(const std::vector<WavePacket>& packets, double R);
// Max over cubes of the number of 2T meeting it (at least 1).
std::size_t incidence_count(const std::vector<WavePacket>& packets,
                            std::span<const Vec3> cube_centers, double cube_side);
// Fills Y with cubes_meeting_tubes and M with incidence_count.
PacketEnsemble make_ensemble(std::vector<WavePacket> packets, const StrichartzParams& params);
// count distinct random caps (both sheets), tubes through the origin, seeded phases.
PacketEnsemble bush_ensemble(std::size_t count, std::uint64_t seed, const StrichartzParams& params);

// Whether the oriented box meets the axis-aligned cube (separating axis test).
bool box_meets_cube(const OrientedBox& box, Vec3 cube_center, double cube_side);

struct StrichartzResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  std::size_t tubes = 0;
  std::size_t cubes = 0;
  std::size_t incidence = 0;
  double max_outside_energy = 0.0;
};

// Checks the ensemble clauses (PreconditionError naming the failed one), then
// lhs = ‖Σ f_T‖_{L^p(Y)} by midpoint quadrature per cube and
// rhs = (M R^{−3/2}/|𝕎|)^{1/2−1/p} (Σ ‖f_T‖₂²)^{1/2}.
StrichartzResult strichartz_experiment(const PacketEnsemble& ensemble, double p = 6.0);

// ---------------------------------------------------------------------------
// Lorentz rescaling at an intermediate cap τ ∼ 1 × R^{−1/4} × R^{−1/2}

struct RescaledBox {
  std::array<double, 3> semi_axes{};     // sorted descending
  std::array<double, 3> expected{};      // sorted descending
  bool within_factor4 = false;
};

struct LorentzReport {
  double determinant = 0.0;
  RescaledBox dual_box;   // L⁻¹(□), expected a cube of side R^{1/2}
  RescaledBox sub_tube;   // L⁻¹(T'), expected R^{1/4+δ/2}/100 × R^{1/4+δ/2}/100 × 3R^{1/2}
};

class LorentzRescaling {
 public:
  // tau must be a standard cap at scale R^{1/4} (PreconditionError otherwise).
  LorentzRescaling(const StandardCap& tau, double R);

  double R() const { return R_; }
  const StandardCap& cap() const { return tau_; }

  // Frequency map: tangential ×R^{1/4}, normal ×R^{1/2}, generator fixed.
  Vec3 apply(Vec3 xi) const;
  Vec3 inverse(Vec3 xi) const;
  double determinant() const;
  Vec3 flat_direction() const { return tau_.box.axes[1]; }

  // Spatial side: x ↦ L⁻¹x.
  Vec3 spatial(Vec3 x) const { return inverse(x); }
  // g(y) = det^{1/2} f(L y), so ĝ = det^{−1/2} f̂∘L⁻¹ and ‖g‖₂ = ‖f‖₂.
  std::function<cplx(Vec3)> rescale(std::function<cplx(Vec3)> field) const;

  // Semi-axes of L⁻¹(box).
  std::array<double, 3> rescaled_semi_axes(const OrientedBox& box) const;
  // □ dual to τ and a T' of a cap at angle offset phi_offset inside τ.
  LorentzReport report(double delta, double phi_offset = 0.0) const;

 private:
  StandardCap tau_;
  double R_;
  std::array<double, 3> scale_{};  // along the cap axes
};

}  // namespace projlab
