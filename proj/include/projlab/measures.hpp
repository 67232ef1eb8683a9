#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "projlab/vec.hpp"

namespace projlab {

// Weighted point cloud in ℝ^dim, coordinates stored row-major.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  AtomicMeasure(std::size_t dim, std::vector<double> coords, std::vector<double> weights);

  static AtomicMeasure from_points(std::span<const Vec3> points, std::span<const double> weights);
  static AtomicMeasure uniform(std::span<const Vec3> points);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }

  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
  Vec3 vec3(std::size_t i) const;
  double weight(std::size_t i) const { return weights_[i]; }

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& weights() const { return weights_; }

  double total_mass() const { return total_mass_; }
  double support_radius() const { return support_radius_; }

  AtomicMeasure scaled(double factor) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double total_mass_ = 0.0;
  double support_radius_ = 0.0;
};

// Similarity x ↦ ratio·R·x + translation (R orthogonal, identity if absent).
struct SimilarityMap {
  double ratio = 0.5;
  std::vector<double> translation;
  std::optional<std::vector<double>> rotation;  // dim×dim, row-major
};

struct IFSSpec {
  std::size_t dim = 3;
  std::vector<SimilarityMap> maps;
  double target_alpha = 0.0;
  std::uint64_t seed = 0;
  bool open_set_condition = false;
  bool random_orientation = false;  // apply a seeded global rotation to the attractor

  // Solves Σ ratio_i^s = 1.
  double similarity_dimension() const;
  void validate() const;
};

// 8 maps x ↦ r x + (1 − r) c over the corners c ∈ {±1/2}³, with r = 8^{−1/α}.
IFSSpec cube_corner_ifs(double alpha, std::uint64_t seed, bool random_orientation = true);

// Maps x ↦ r x + (1 − r) c over the given corners; dimension log(#corners)/log(1/r).
IFSSpec corner_ifs(std::size_t dim, const std::vector<std::vector<double>>& corners, double ratio);

inline constexpr std::size_t kDefaultAtomBudget = std::size_t{1} << 23;

// Uniform weights on the depth-level cylinder points, started from the fixed point of map 0.
AtomicMeasure ifs_generate(const IFSSpec& spec, int depth,
                           std::size_t max_atoms = kDefaultAtomBudget);

// Ball-mass queries over a weighted cloud.
class BallMassIndex {
 public:
  explicit BallMassIndex(const AtomicMeasure& mu, std::size_t leaf_size = 16);
  ~BallMassIndex();
  BallMassIndex(BallMassIndex&&) noexcept;
  BallMassIndex& operator=(BallMassIndex&&) noexcept;

  // μ(closed ball of radius r about center)
  double mass(std::span<const double> center, double radius) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// max over atoms x and radii r of μ(B(x, r)) / r^α. With max_centers > 0 only an
// evenly strided subset of that many atoms serves as ball centers.
double frostman_constant(const AtomicMeasure& mu, double alpha, std::span<const double> radii,
                         std::size_t max_centers = 0);

// Same scan for several exponents at once, sharing the ball-mass queries.
std::vector<double> frostman_constants(const AtomicMeasure& mu, std::span<const double> alphas,
                                       std::span<const double> radii,
                                       std::size_t max_centers = 0);

// 2^{-lo}, ..., 2^{-hi}
std::vector<double> dyadic_radii(int lo, int hi);

struct RieszEnergy {
  double value = 0.0;
  std::size_t coincident_pairs = 0;  // unordered pairs at distance 0, excluded from value
};

// Σ_{i≠j} w_i w_j |x_i − x_j|^{−s}
RieszEnergy riesz_energy(const AtomicMeasure& mu, double s);

using PointMap = std::function<void(std::span<const double> in, std::span<double> out)>;

AtomicMeasure pushforward_map(const AtomicMeasure& mu, std::size_t out_dim, const PointMap& f);

// Columnar binary container: "PLAB", u32 version, u32 dim, u64 count, coordinate
// columns, weight column, all little-endian. Sidecar JSON written to path + ".json".
inline constexpr std::uint32_t kContainerVersion = 1;
void write_measure(const std::string& path, const AtomicMeasure& mu,
                   const std::string& sidecar_json = "{}");
AtomicMeasure read_measure(const std::string& path);

}  // namespace projlab
