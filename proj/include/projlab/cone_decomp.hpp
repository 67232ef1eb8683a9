#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "projlab/grid.hpp"
#include "projlab/projections.hpp"
#include "projlab/vec.hpp"

namespace projlab {

// Oriented box: center, orthonormal axes, half-widths along each axis.
struct OrientedBox {
  Vec3 center;
  std::array<Vec3, 3> axes;
  std::array<double, 3> half_widths{};

  // Coordinates along the axes relative to the center, divided by the half-widths.
  std::array<double, 3> local(Vec3 p) const;
  bool contains(Vec3 p, double dilation = 1.0) const;
  std::array<Vec3, 8> corners(double dilation = 1.0) const;
  double volume() const { return 8.0 * half_widths[0] * half_widths[1] * half_widths[2]; }
  // Euclidean distance from the origin to the box.
  double distance_to_origin() const;
};

enum class ConeSide { forward, backward };

// Box frame at cone angle phi: tangential, generator (radial) and outward normal.
std::array<Vec3, 3> cone_frame(double phi, ConeSide side);

// Standard K⁻¹-cap of Γ₁ ∪ −Γ₁; axes as in cone_frame.
struct StandardCap {
  ConeSide side = ConeSide::forward;
  double angle = 0.0;  // angle of the horizontal part of the covered cone points
  OrientedBox box;
};

// Caps centered at radius 3/4 with half-widths (K⁻¹, 1/2, 3/2·K⁻²). K may be fractional.
std::vector<StandardCap> standard_caps_at_scale(double scale);
// Integer K ≥ 2.
std::vector<StandardCap> standard_caps(int K);

// Cap τ_{j,k}. For k < j each angular slot has an outer (layer +1) and an inner
// (layer −1) box at normal offset ±3/4·2^{j−k}; for k = j one box straddles the cone
// with normal half-width 3/2 and the radial half-width grown by min(1, 2^j/4).
struct Cap {
  int j = 0;
  int k = 0;
  int index = 0;  // angular slot
  int layer = 0;
  ConeSide side = ConeSide::forward;
  double angle = 0.0;       // ∠τ
  double star_angle = 0.0;  // (∠τ)*; the tubes of τ point along γ((∠τ)*)
  OrientedBox box;
};

int cap_slot_count(int k);
std::vector<Cap> build_caps(int j, int k);
// Same, checking that 1.1τ fits the grid's frequency band.
std::vector<Cap> build_caps(int j, int k, const GridSpec& grid);
// Largest j with 2^j ≤ nyquist/4, or −1.
int resolvable_j_max(const GridSpec& grid);

struct PacketParams {
  double eps = 0.1;
  double delta = 0.005;
  int J = 1;
  double alpha = 2.0;

  double alpha_star() const;
  void validate() const;
};

enum class TubeClass { good, bad };

struct Tube {
  int j = 0;
  int k = 0;
  std::array<long, 3> lattice{};  // center = Σ 2·lattice[a]·half_widths[a]·axes[a]
  OrientedBox box;
  double mass_10T = 0.0;
  TubeClass cls = TubeClass::good;
};

// (2^{−j}2^{k(1/2+δ)}, 2^{−j}2^{k(1/2+δ)}, 10·2^{−(j−k)+kδ}) along the cap axes.
std::array<double, 3> tube_half_widths(int j, int k, double delta);
// Tubes of the cap's lattice that meet B(0, radius).
std::vector<Tube> build_tubes(const Cap& cap, double delta, double radius = 2.0);

// 100·2^{(k/2)(100δ−α*)}·2^{−α(j−k)}
double bad_threshold(int j, int k, const PacketParams& params);

struct TubeClassification {
  std::vector<Tube> tubes;
  double threshold = 0.0;
  double alpha_star = 0.0;
  std::size_t bad_count = 0;
  double bad_mass = 0.0;  // Σ μ(10T) over bad tubes
};

// Recounts μ(10T) exactly for atoms (or grid cell centers) and applies the threshold.
TubeClassification classify_tubes(const AtomicMeasure& mu, std::vector<Tube> tubes,
                                  const PacketParams& params);
TubeClassification classify_tubes(const GridField& mu, std::vector<Tube> tubes,
                                  const PacketParams& params);

// Masses of dilates of every tube in one cap's lattice, by binning points at half
// the tube half-width and prefix-summing.
class TubeMassCounter {
 public:
  TubeMassCounter(std::array<Vec3, 3> axes, std::array<double, 3> half_widths,
                  std::span<const Vec3> points, std::span<const double> masses);
  // μ(dilation·T) for the tube with the given lattice index; dilation is an integer ≥ 1.
  double mass(const std::array<long, 3>& lattice, int dilation) const;

 private:
  double box_sum(std::array<long, 3> lo, std::array<long, 3> hi) const;

  std::array<Vec3, 3> axes_;
  std::array<double, 3> half_widths_;
  std::array<long, 3> origin_{};
  std::array<long, 3> extent_{};
  std::vector<double> prefix_;
};

// C² cutoff: 1 on [0, inner], 0 beyond outer, raised cosine of a smoothstep between.
double smooth_cutoff(double u, double inner, double outer);

// Windows ψ_τ over all caps with j ∈ [J, j_max(grid)], 0 ≤ k ≤ j, normalized by their
// pointwise sum, and tube windows η_T normalized over each cap's tube lattice.
class PacketCover {
 public:
  PacketCover(GridSpec grid, PacketParams params);

  const GridSpec& grid() const { return grid_; }
  const PacketParams& params() const { return params_; }
  int j_max() const { return j_max_; }
  const std::vector<Cap>& caps() const { return caps_; }

  // Raw window of a cap (before normalization): 1 on τ, 0 outside 1.1τ.
  static double raw_cap_window(const Cap& cap, Vec3 xi);
  // Σ of raw windows at xi (recomputed), and ψ_τ(ξ).
  double raw_window_sum(Vec3 xi) const;
  double cap_window(const Cap& cap, Vec3 xi) const;
  // Σ_τ ψ_τ(ξ): 1 on the covered region.
  double partition_sum(Vec3 xi) const;
  // ψ_τ sampled on the frequency grid.
  GridField cap_window_field(const Cap& cap) const;
  // Raw window sum on the frequency grid, FFT order.
  const std::vector<double>& window_sum() const { return window_sum_; }

  // Raw tube window 1 on T, 0 outside 2T; η_T is it divided by the lattice sum.
  static double tube_window(const Cap& cap, const Tube& tube, Vec3 x);

  // (ψ_τ f̂)ˇ for a spatial field f.
  GridField band(const GridField& f, const Cap& cap) const;
  // M_T f = η_T (ψ_τ f̂)ˇ
  GridField apply_wave_packet(const GridField& f, const Cap& cap, const Tube& tube) const;

 private:
  void check_field(const GridField& f) const;

  GridSpec grid_;
  PacketParams params_;
  int j_max_ = -1;
  std::vector<Cap> caps_;
  std::vector<double> window_sum_;  // raw window sum on the frequency grid (FFT order)
};

// Fraction of the packet's Fourier energy outside dilation·τ.
double packet_leakage(const GridField& packet, const Cap& cap, double dilation = 4.0);

struct GoodBadLedgerRow {
  int j = 0;
  int k = 0;
  std::size_t caps = 0;
  std::size_t tubes = 0;
  std::size_t bad_count = 0;
  double bad_mass = 0.0;
  double threshold = 0.0;
  // max over tubes of ‖M_T μ‖₁ / (μ(2T) + 2^{−4k})
  double packet_constant = 0.0;
};

struct GoodBadOptions {
  bool audit_packets = true;
};

struct GoodBadDecomposition {
  GridField mu_b;
  GridField mu_g;
  std::vector<GoodBadLedgerRow> ledger;
};

// μ_b = Σ over j ∈ [J, j_max], k ∈ [⌈jε⌉, j], bad tubes T of M_T μ; μ_g = μ − μ_b.
GoodBadDecomposition decompose_good_bad(const GridField& mu, const PacketParams& params,
                                        const GoodBadOptions& options = {});
// Same with a frozen bad set given per cap (flat index into cover.caps()).
GoodBadDecomposition decompose_with_classes(const GridField& mu, const PacketCover& cover,
                                            const std::vector<std::vector<Tube>>& bad_tubes);
// Bad tubes of μ per cap of the cover (empty for k < ⌈jε⌉).
std::vector<std::vector<Tube>> bad_tubes_by_cap(const GridField& mu, const PacketCover& cover);

struct NonstationaryOptions {
  int decay_order = 2;            // N in 2^{−kN}
  double angle_constant = 1e3;    // admissible gap angle_constant·2^{k(−1/2+δ)}
  Grid2DSpec plane{128, 2.0};
};

struct NonstationaryResult {
  double observed = 0.0;   // ‖π_{θ#}(M_T f)‖₁
  double reference = 0.0;  // 2^{−kN}‖f‖₁
  double ratio = 0.0;
  double angle_gap = 0.0;
  double required_gap = 0.0;
};

// Smallest admissible |(∠τ)* − θ| for level k.
double nonstationary_required_gap(int k, double delta, double angle_constant = 1e3);
NonstationaryResult nonstationary_check(const GridField& f, const PacketCover& cover,
                                        const Cap& cap, const Tube& tube, double theta,
                                        const NonstationaryOptions& options = {});

}  // namespace projlab
