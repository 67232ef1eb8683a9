#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "projlab/geometry.hpp"
#include "projlab/measures.hpp"
#include "projlab/projections.hpp"

namespace projlab {

// Linear unit vector field v ↦ Av on S^{d−1}; A antisymmetric with |Av| = |v|.
class LinearVectorField {
 public:
  explicit LinearVectorField(Eigen::MatrixXd matrix);

  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  Eigen::VectorXd operator()(const Eigen::VectorXd& v) const { return matrix_ * v; }
  std::string descriptor() const;

 private:
  Eigen::MatrixXd matrix_;
};

// Block rotation (x₁, x₂, …) ↦ (−x₂, x₁, −x₄, x₃, …). DomainError for odd or d < 2.
LinearVectorField make_vector_field(int d);

// v(y) = Q·(y, √(1 − |y|²)) on B_{d−1}(0, radius); Q orthogonal (identity by default).
class HemisphereChart {
 public:
  explicit HemisphereChart(int d, double radius = 0.5);
  HemisphereChart(Eigen::MatrixXd rotation, double radius);

  int dim() const { return static_cast<int>(rotation_.rows()); }
  double radius() const { return radius_; }
  const Eigen::MatrixXd& rotation() const { return rotation_; }

  Eigen::VectorXd point(const Eigen::VectorXd& y) const;
  // d × (d−1) derivative.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& y) const;
  // PreconditionError outside the closed chart ball.
  void check(const Eigen::VectorXd& y) const;

 private:
  Eigen::MatrixXd rotation_;
  double radius_;
};

// F, G: Ω ⊂ ℝ^{d−1} → S^d with (d+1) × (d−1) derivatives.
struct FamilyFG {
  int d = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> F;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> G;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> DF;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> DG;
  std::string descriptor;

  // |F| = |G| = 1 and ⟨F, G⟩ = 0 at y (PreconditionError otherwise).
  void check_sample(const Eigen::VectorXd& y, double tol = 1e-10) const;
};

// G(y) = (v(y), −1)/√2, F(y) = (A v(y), 0). Chart radius above 1/2 is rejected.
FamilyFG family_from_field(const LinearVectorField& field, const HemisphereChart& chart);
// d = 2: F = unit tangent, G = γ × F, parametrized by θ.
FamilyFG family_from_curve(const SphereCurve& curve);

struct RankCheckOptions {
  double tolerance = 1e-8;   // singular values / determinants below count as degenerate
  double mu_min = 1e-3;      // pencil directions with μ₀ ≥ mu_min
  std::size_t pencil_samples = 64;
};

struct RankReport {
  int d = 0;
  std::size_t samples = 0;
  double min_sv_G_DF = 0.0;    // d-th singular value of (G | DF)
  double min_sv_F_DG = 0.0;    // (d−1)-th singular value of (F | DG)
  double max_extra_sv_F_DG = 0.0;  // d-th singular value of (F | DG), zero when rank is d−1
  double min_sv_DG = 0.0;      // (d−1)-th singular value of DG
  double min_det_lambda = 0.0; // min over the λ grid of |det(F, G, DF + λDG)|
  double min_det_pencil = 0.0; // min over μ₀² + μ₁² = 1, μ₀ ≥ μ_min of |det(F, G, μ₀DF + μ₁DG)|
  double min_det_lambda_zero = 0.0;  // |det(F, G, DF)|
  bool rank_G_DF = false;
  bool rank_F_DG = false;
  bool rank_DG = false;
  bool determinant = false;
  std::vector<std::size_t> offending;  // sample indices failing any condition

  bool passed() const { return rank_G_DF && rank_F_DG && rank_DG && determinant; }
};

RankReport verify_rank_conditions(const FamilyFG& family, std::span<const Eigen::VectorXd> samples,
                                  std::span<const double> lambdas, const RankCheckOptions& options = {});

// Seeded uniform points of the chart ball B_{d−1}(0, radius).
std::vector<Eigen::VectorXd> chart_samples(int d, double radius, std::size_t count, std::uint64_t seed);

// Orthonormal pair spanning {(v, −1)/√2, (Av, 0)} as the rows of a 2 × (d+1) matrix.
Eigen::MatrixXd projection_frame(const LinearVectorField& field, const Eigen::VectorXd& v);
// Π(λ, x) for the chart point v(λ).
Eigen::Vector2d projection_pi(const LinearVectorField& field, const HemisphereChart& chart,
                              const Eigen::VectorXd& lambda, const Eigen::VectorXd& x);

struct TransversalityValue {
  double determinant = 0.0;   // det(D_λΦ D_λΦᵀ)
  Eigen::Vector2d pi;         // Π(λ, z)
  Eigen::MatrixXd jacobian;   // D_λΦ, 2 × (d−1)
};

// z = (x − y)/|x − y|; rows ⟨z′, ∂ᵢv⟩/√2 and ⟨−Az′, ∂ᵢv⟩. PreconditionError for x = y.
TransversalityValue transversality_determinant(const LinearVectorField& field,
                                               const HemisphereChart& chart,
                                               const Eigen::VectorXd& lambda,
                                               const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// x = (v(λ), 1)/(2√2), y = −x.
std::pair<Eigen::VectorXd, Eigen::VectorXd> degenerate_pair(const HemisphereChart& chart,
                                                            const Eigen::VectorXd& lambda);

struct HdScanRow {
  Eigen::VectorXd chart_point;
  double dim_est = 0.0;
  double r2 = 0.0;
  double bound = 0.0;
  double covered_area = 0.0;
  double frame_condition = 0.0;  // condition number of (F, G, DF) at the chart point
  bool reliable = false;
  bool below = false;
};

struct HdScanReport {
  int d = 0;
  std::string field;
  double alpha = 0.0;
  double bound = 0.0;        // min{α, 2}
  bool positive_area = false;  // α > 2: rows report the covered-area proxy
  std::vector<HdScanRow> rows;
  std::size_t reliable_count = 0;
  double below_fraction = 0.0;
  double median_estimate = 0.0;
};

// Box dimension of π_v μ per chart point; μ lives in ℝ^{d+1}, d even ≥ 4.
HdScanReport hd_projection_scan(const AtomicMeasure& mu, const LinearVectorField& field,
                                const HemisphereChart& chart,
                                std::span<const Eigen::VectorXd> chart_points,
                                const ScanConfig& config);

}  // namespace projlab
