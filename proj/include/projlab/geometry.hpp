#pragma once

#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "projlab/vec.hpp"

namespace projlab {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

// Distance between angles on the circle, in [0, π].
double angle_distance(double a, double b);

// Reduces an angle to [0, 2π).
double wrap_angle(double a);

enum class CurveKind { model_cone_circle, small_circle, custom };

// Orthonormal basis of the plane orthogonal to the curve point.
struct PlaneFrame {
  Vec3 e1;      // unit tangent
  Vec3 e2;      // point × e1
  Vec3 normal;  // the curve point itself
};

struct CurveJet {
  Vec3 gamma;
  Vec3 d1;  // raw first derivative
  Vec3 d2;
  PlaneFrame frame;
};

class SphereCurve {
 public:
  using PointFn = std::function<Vec3(double)>;

  // (cos θ, sin θ, 1)/√2
  static SphereCurve model();
  // (r cos θ, r sin θ, h) with r = √(1 − h²); h = 0 is the equatorial great circle.
  static SphereCurve small_circle(double height);
  static SphereCurve great_circle() { return small_circle(0.0); }
  // Arbitrary sphere-valued curve; derivatives by 4th-order central differences.
  static SphereCurve custom(PointFn fn, double theta_min, double theta_max, bool periodic,
                            std::string name = "custom");

  CurveKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  bool periodic() const { return periodic_; }
  double height() const { return height_; }

  Vec3 eval(double theta) const;
  Vec3 deriv1(double theta) const;
  Vec3 deriv2(double theta) const;
  CurveJet jet(double theta) const;

  // Evenly spaced parameters covering the domain (right endpoint excluded).
  std::vector<double> sample_grid(std::size_t n) const;

 private:
  SphereCurve(CurveKind kind, std::string name, double tmin, double tmax, bool periodic);
  double reduce(double theta) const;

  CurveKind kind_;
  std::string name_;
  double theta_min_;
  double theta_max_;
  bool periodic_;
  double height_ = 0.0;
  double radius_ = 1.0;
  PointFn fn_;
};

// Point, derivatives and the orthogonal-plane frame. Throws DomainError outside the domain.
CurveJet curve_eval(const SphereCurve& curve, double theta);

// Distance to the full light cone {λ γ(θ) : λ ∈ ℝ} of the model curve.
double cone_distance(Vec3 p);
// Minimization over the cone parametrization, used for z ≤ 0.
double cone_distance_search(Vec3 p);

// det(γ′ | γ×γ′ | η1 γ″ + η2 γ×γ″)
double triple_product_jacobian(const SphereCurve& curve, double eta1, double eta2, double theta);

struct PolarChange {
  double eta1;
  double eta2;
  double jacobian;  // +inf at t = 1
  bool singular;
};

// (r, t) ↦ (r√(1−t²), r t) with Jacobian r/√(1−t²).
PolarChange polar_change(double r, double t);

// √(1−t²) γ′(θ) + t γ(θ)×γ′(θ)
Vec3 gamma_t_eval(const SphereCurve& curve, double theta, double t);

// det(γ, γ′, γ″)
double geodesic_curvature(const SphereCurve& curve, double theta);

// Parameters where det(γ, γ′, γ″) changes sign, located by bisection after a sample scan.
std::vector<double> curvature_zero_crossings(const SphereCurve& curve, std::size_t samples = 2048);

// Exponents of the projection argument, derived from dim A and ε.
struct ProofExponents {
  double dim_a;
  double epsilon;
  double alpha;       // dim A − ε
  double alpha_star;  // max{α/3 + 1, α − 1/2} − ε
  double s;           // max{4α/9 + 5/6, (2α+1)/3}
  double s_prime;     // s − 50√ε
  double kappa;       // 1 − ε/10⁵
};

ProofExponents proof_exponents(double dim_a, double epsilon);

double alpha_star(double alpha, double epsilon);

// Lower bound on dim π_θ(A) for the model curve, valid for α ∈ (3/2, 5/2).
double model_curve_bound(double alpha);

// Piecewise lower bound for curves with nonvanishing geodesic curvature.
// Returns +inf for α > 5/2, where the statement is positive area instead of a dimension.
double curved_family_bound(double alpha);

}  // namespace projlab
