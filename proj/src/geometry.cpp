#include "projlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "projlab/errors.hpp"

namespace projlab {

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double angle_distance(double a, double b) {
  const double d = wrap_angle(a - b);
  return std::min(d, kTwoPi - d);
}

SphereCurve::SphereCurve(CurveKind kind, std::string name, double tmin, double tmax, bool periodic)
    : kind_(kind), name_(std::move(name)), theta_min_(tmin), theta_max_(tmax), periodic_(periodic) {}

SphereCurve SphereCurve::model() {
  return SphereCurve(CurveKind::model_cone_circle, "model", 0.0, kTwoPi, true);
}

SphereCurve SphereCurve::small_circle(double height) {
  if (!(std::abs(height) < 1.0)) throw PreconditionError("small circle height must lie in (-1, 1)");
  SphereCurve c(CurveKind::small_circle, height == 0.0 ? "great-circle" : "small-circle", 0.0,
                kTwoPi, true);
  c.height_ = height;
  c.radius_ = std::sqrt(1.0 - height * height);
  return c;
}

SphereCurve SphereCurve::custom(PointFn fn, double theta_min, double theta_max, bool periodic,
                                std::string name) {
  if (!fn) throw PreconditionError("custom curve needs a point function");
  if (!(theta_max > theta_min)) throw PreconditionError("custom curve domain is empty");
  SphereCurve c(CurveKind::custom, std::move(name), theta_min, theta_max, periodic);
  c.fn_ = std::move(fn);
  return c;
}

double SphereCurve::reduce(double theta) const {
  if (!std::isfinite(theta)) throw DomainError("curve parameter is not finite");
  if (periodic_) {
    const double period = theta_max_ - theta_min_;
    double r = std::fmod(theta - theta_min_, period);
    if (r < 0.0) r += period;
    return theta_min_ + r;
  }
  if (theta < theta_min_ || theta >= theta_max_) {
    throw DomainError("curve parameter " + std::to_string(theta) + " outside [" +
                      std::to_string(theta_min_) + ", " + std::to_string(theta_max_) + ")");
  }
  return theta;
}

namespace {
constexpr double kFdStep = 1e-4;
}

Vec3 SphereCurve::eval(double theta) const {
  const double t = reduce(theta);
  switch (kind_) {
    case CurveKind::model_cone_circle:
      return Vec3{std::cos(t), std::sin(t), 1.0} / kSqrt2;
    case CurveKind::small_circle:
      return {radius_ * std::cos(t), radius_ * std::sin(t), height_};
    case CurveKind::custom:
      return fn_(t);
  }
  return {};
}

Vec3 SphereCurve::deriv1(double theta) const {
  const double t = reduce(theta);
  switch (kind_) {
    case CurveKind::model_cone_circle:
      return Vec3{-std::sin(t), std::cos(t), 0.0} / kSqrt2;
    case CurveKind::small_circle:
      return {-radius_ * std::sin(t), radius_ * std::cos(t), 0.0};
    case CurveKind::custom: {
      const double h = kFdStep;
      return (8.0 * (fn_(t + h) - fn_(t - h)) - (fn_(t + 2 * h) - fn_(t - 2 * h))) / (12.0 * h);
    }
  }
  return {};
}

Vec3 SphereCurve::deriv2(double theta) const {
  const double t = reduce(theta);
  switch (kind_) {
    case CurveKind::model_cone_circle:
      return Vec3{-std::cos(t), -std::sin(t), 0.0} / kSqrt2;
    case CurveKind::small_circle:
      return {-radius_ * std::cos(t), -radius_ * std::sin(t), 0.0};
    case CurveKind::custom: {
      const double h = kFdStep;
      const Vec3 c = fn_(t);
      return (16.0 * (fn_(t + h) + fn_(t - h)) - (fn_(t + 2 * h) + fn_(t - 2 * h)) - 30.0 * c) /
             (12.0 * h * h);
    }
  }
  return {};
}

CurveJet SphereCurve::jet(double theta) const {
  CurveJet j;
  j.gamma = eval(theta);
  j.d1 = deriv1(theta);
  j.d2 = deriv2(theta);
  const double speed = norm(j.d1);
  if (!(speed > 0.0)) throw DomainError("curve has zero speed at " + std::to_string(theta));
  j.frame.normal = j.gamma;
  j.frame.e1 = j.d1 / speed;
  j.frame.e2 = cross(j.gamma, j.frame.e1);
  return j;
}

std::vector<double> SphereCurve::sample_grid(std::size_t n) const {
  std::vector<double> out(n);
  const double step = (theta_max_ - theta_min_) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = theta_min_ + step * static_cast<double>(i);
  return out;
}

CurveJet curve_eval(const SphereCurve& curve, double theta) { return curve.jet(theta); }

double cone_distance_search(Vec3 p) {
  // For fixed θ the optimal λ is ⟨p, γ(θ)⟩, leaving a one-dimensional search in θ.
  const SphereCurve model = SphereCurve::model();
  auto residual_sq = [&](double theta) {
    const double lambda = dot(p, model.eval(theta));
    const Vec3 d = p - lambda * model.eval(theta);
    return dot(d, d);
  };
  constexpr int kGrid = 720;
  const double step = kTwoPi / kGrid;
  double best_theta = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double theta = step * i;
    const double r = residual_sq(theta);
    if (r < best) {
      best = r;
      best_theta = theta;
    }
  }
  // Golden-section descent on the bracketing interval.
  constexpr double kInvPhi = 0.6180339887498949;
  double lo = best_theta - step;
  double hi = best_theta + step;
  double a = hi - kInvPhi * (hi - lo);
  double b = lo + kInvPhi * (hi - lo);
  double fa = residual_sq(a);
  double fb = residual_sq(b);
  for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - kInvPhi * (hi - lo);
      fa = residual_sq(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + kInvPhi * (hi - lo);
      fb = residual_sq(b);
    }
  }
  best = std::min({best, fa, fb});
  return std::sqrt(std::max(0.0, best));
}

double cone_distance(Vec3 p) {
  if (p.z > 0.0) return std::abs(std::hypot(p.x, p.y) - p.z) / kSqrt2;
  return cone_distance_search(p);
}

double triple_product_jacobian(const SphereCurve& curve, double eta1, double eta2, double theta) {
  const CurveJet j = curve.jet(theta);
  const Vec3 binormal = cross(j.gamma, j.d1);
  const Vec3 mixed = eta1 * j.d2 + eta2 * cross(j.gamma, j.d2);
  return det3(j.d1, binormal, mixed);
}

PolarChange polar_change(double r, double t) {
  if (!(r > 0.0)) throw PreconditionError("polar change needs r > 0");
  if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("polar change needs t in [0, 1]");
  const double root = std::sqrt(1.0 - t * t);
  PolarChange out{r * root, r * t, 0.0, t == 1.0};
  out.jacobian = out.singular ? std::numeric_limits<double>::infinity() : r / root;
  return out;
}

Vec3 gamma_t_eval(const SphereCurve& curve, double theta, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw PreconditionError("gamma_t needs t in [0, 1]");
  const CurveJet j = curve.jet(theta);
  return std::sqrt(1.0 - t * t) * j.d1 + t * cross(j.gamma, j.d1);
}

double geodesic_curvature(const SphereCurve& curve, double theta) {
  const CurveJet j = curve.jet(theta);
  return det3(j.gamma, j.d1, j.d2);
}

std::vector<double> curvature_zero_crossings(const SphereCurve& curve, std::size_t samples) {
  std::vector<double> roots;
  if (samples < 2) return roots;
  const std::vector<double> grid = curve.sample_grid(samples);
  const double step = grid.size() > 1 ? grid[1] - grid[0] : 0.0;
  const std::size_t intervals = curve.periodic() ? samples : samples - 1;
  auto value = [&](double t) { return geodesic_curvature(curve, t); };
  double prev = value(grid[0]);
  for (std::size_t i = 0; i < intervals; ++i) {
    double lo = grid[i];
    double hi = lo + step;
    if (!curve.periodic() && i + 1 < grid.size()) hi = grid[i + 1];
    const double next = value(hi);
    if (prev == 0.0) {
      roots.push_back(lo);
    } else if ((prev < 0.0) != (next < 0.0) && next != 0.0) {
      double flo = prev;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = value(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev = next;
  }
  return roots;
}

double alpha_star(double alpha, double epsilon) {
  return std::max(alpha / 3.0 + 1.0, alpha - 0.5) - epsilon;
}

double model_curve_bound(double alpha) {
  return std::max(4.0 * alpha / 9.0 + 5.0 / 6.0, (2.0 * alpha + 1.0) / 3.0);
}

double curved_family_bound(double alpha) {
  if (alpha < 0.0) throw DomainError("dimension must be nonnegative");
  if (alpha <= 1.0) return alpha;
  if (alpha <= 2.0) return (alpha + 1.0) / 2.0;
  if (alpha <= 2.5) return alpha - 0.5;
  return std::numeric_limits<double>::infinity();
}

ProofExponents proof_exponents(double dim_a, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  ProofExponents e{};
  e.dim_a = dim_a;
  e.epsilon = epsilon;
  e.alpha = dim_a - epsilon;
  e.alpha_star = alpha_star(e.alpha, epsilon);
  e.s = model_curve_bound(e.alpha);
  e.s_prime = e.s - 50.0 * std::sqrt(epsilon);
  e.kappa = 1.0 - epsilon / 1e5;
  return e;
}

}  // namespace projlab
