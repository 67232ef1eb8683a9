#include "projlab/highdim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "projlab/errors.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

namespace {

Eigen::VectorXd to_eigen(Vec3 v) { return Eigen::Vector3d(v.x, v.y, v.z); }

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

}  // namespace

// ------------------------------------------------------------ vector fields

LinearVectorField::LinearVectorField(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() < 2) {
    throw PreconditionError("vector field needs a square matrix of size ≥ 2");
  }
  if ((matrix_ + matrix_.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    throw PreconditionError("vector field matrix must be antisymmetric");
  }
  const Eigen::MatrixXd gram = matrix_.transpose() * matrix_;
  if ((gram - Eigen::MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff() > 1e-12) {
    throw PreconditionError("vector field matrix must be an isometry (unit field)");
  }
}

std::string LinearVectorField::descriptor() const {
  return "block-rotation-d" + std::to_string(dim());
}

LinearVectorField make_vector_field(int d) {
  if (d < 2 || d % 2 != 0) {
    throw DomainError("no nonvanishing continuous vector fields on S^{d-1} for odd d (got d = " +
                      std::to_string(d) + ")");
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; i += 2) {
    a(i, i + 1) = -1.0;
    a(i + 1, i) = 1.0;
  }
  return LinearVectorField(std::move(a));
}

// ------------------------------------------------------------ chart

HemisphereChart::HemisphereChart(int d, double radius)
    : HemisphereChart(Eigen::MatrixXd::Identity(d, d), radius) {}

HemisphereChart::HemisphereChart(Eigen::MatrixXd rotation, double radius)
    : rotation_(std::move(rotation)), radius_(radius) {
  if (rotation_.rows() != rotation_.cols() || rotation_.rows() < 2) {
    throw PreconditionError("chart rotation must be square of size ≥ 2");
  }
  const Eigen::MatrixXd gram = rotation_.transpose() * rotation_;
  if ((gram - Eigen::MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff() > 1e-10) {
    throw PreconditionError("chart rotation must be orthogonal");
  }
  if (!(radius_ > 0.0 && radius_ < 1.0)) throw PreconditionError("chart radius must lie in (0, 1)");
}

void HemisphereChart::check(const Eigen::VectorXd& y) const {
  if (y.size() != dim() - 1) throw PreconditionError("chart point has the wrong dimension");
  if (y.norm() > radius_ * (1.0 + 1e-12)) throw PreconditionError("chart point outside the chart ball");
}

Eigen::VectorXd HemisphereChart::point(const Eigen::VectorXd& y) const {
  check(y);
  Eigen::VectorXd v(dim());
  v.head(dim() - 1) = y;
  v(dim() - 1) = std::sqrt(1.0 - y.squaredNorm());
  return rotation_ * v;
}

Eigen::MatrixXd HemisphereChart::jacobian(const Eigen::VectorXd& y) const {
  check(y);
  const int d = dim();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(d, d - 1);
  j.topRows(d - 1).setIdentity();
  j.row(d - 1) = -y.transpose() / std::sqrt(1.0 - y.squaredNorm());
  return rotation_ * j;
}

// ------------------------------------------------------------ families

void FamilyFG::check_sample(const Eigen::VectorXd& y, double tol) const {
  const Eigen::VectorXd f = F(y);
  const Eigen::VectorXd g = G(y);
  if (std::abs(f.norm() - 1.0) > tol || std::abs(g.norm() - 1.0) > tol) {
    throw PreconditionError("family: F and G must be unit vectors");
  }
  if (std::abs(f.dot(g)) > tol) throw PreconditionError("family: F and G must be orthogonal");
}

FamilyFG family_from_field(const LinearVectorField& field, const HemisphereChart& chart) {
  if (field.dim() != chart.dim()) throw PreconditionError("field and chart dimensions differ");
  if (chart.radius() > 0.5 + 1e-12) throw PreconditionError("family chart radius must be ≤ 1/2");
  const int d = field.dim();
  FamilyFG fam;
  fam.d = d;
  fam.descriptor = field.descriptor();
  const Eigen::MatrixXd a = field.matrix();
  fam.G = [chart, d](const Eigen::VectorXd& y) {
    Eigen::VectorXd g(d + 1);
    g.head(d) = chart.point(y);
    g(d) = -1.0;
    return Eigen::VectorXd(g / kSqrt2);
  };
  fam.F = [chart, a, d](const Eigen::VectorXd& y) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d + 1);
    f.head(d) = a * chart.point(y);
    return f;
  };
  fam.DG = [chart, d](const Eigen::VectorXd& y) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d - 1);
    m.topRows(d) = chart.jacobian(y) / kSqrt2;
    return m;
  };
  fam.DF = [chart, a, d](const Eigen::VectorXd& y) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d - 1);
    m.topRows(d) = a * chart.jacobian(y);
    return m;
  };
  return fam;
}

FamilyFG family_from_curve(const SphereCurve& curve) {
  FamilyFG fam;
  fam.d = 2;
  fam.descriptor = curve.name();
  auto tangent = [curve](double t) { return normalized(curve.deriv1(t)); };
  // Derivative of the unit tangent in θ.
  auto tangent_rate = [curve](double t) {
    const Vec3 d1 = curve.deriv1(t);
    const Vec3 d2 = curve.deriv2(t);
    const double speed = norm(d1);
    const Vec3 unit = d1 / speed;
    return (d2 - dot(unit, d2) * unit) / speed;
  };
  fam.F = [tangent](const Eigen::VectorXd& y) { return to_eigen(tangent(y(0))); };
  fam.G = [curve, tangent](const Eigen::VectorXd& y) {
    return to_eigen(cross(curve.eval(y(0)), tangent(y(0))));
  };
  fam.DF = [tangent_rate](const Eigen::VectorXd& y) {
    Eigen::MatrixXd m(3, 1);
    m.col(0) = to_eigen(tangent_rate(y(0)));
    return m;
  };
  fam.DG = [curve, tangent_rate](const Eigen::VectorXd& y) {
    Eigen::MatrixXd m(3, 1);
    m.col(0) = to_eigen(cross(curve.eval(y(0)), tangent_rate(y(0))));
    return m;
  };
  return fam;
}

// ------------------------------------------------------------ rank conditions

namespace {

struct SampleRanks {
  double sv_G_DF;
  double sv_F_DG;
  double extra_F_DG;
  double sv_DG;
  double det_lambda;
  double det_pencil;
  double det_zero;
};

double frame_det(const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::MatrixXd& cols) {
  const Eigen::Index n = f.size();
  Eigen::MatrixXd m(n, n);
  m.col(0) = f;
  m.col(1) = g;
  m.rightCols(n - 2) = cols;
  return std::abs(m.determinant());
}

}  // namespace

RankReport verify_rank_conditions(const FamilyFG& family, std::span<const Eigen::VectorXd> samples,
                                  std::span<const double> lambdas, const RankCheckOptions& options) {
  if (samples.empty()) throw PreconditionError("rank check needs at least one sample");
  if (!(options.mu_min > 0.0 && options.mu_min < 1.0)) {
    throw PreconditionError("rank check: mu_min must lie in (0, 1)");
  }
  const int d = family.d;
  const double span = std::acos(options.mu_min);
  const std::size_t pencil = std::max<std::size_t>(options.pencil_samples, 2);
  std::vector<SampleRanks> per(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    const Eigen::VectorXd& y = samples[i];
    family.check_sample(y);
    const Eigen::VectorXd f = family.F(y);
    const Eigen::VectorXd g = family.G(y);
    const Eigen::MatrixXd df = family.DF(y);
    const Eigen::MatrixXd dg = family.DG(y);
    SampleRanks r{};
    Eigen::MatrixXd g_df(d + 1, d);
    g_df << g, df;
    r.sv_G_DF = singular_values(g_df)(d - 1);
    Eigen::MatrixXd f_dg(d + 1, d);
    f_dg << f, dg;
    const Eigen::VectorXd sv = singular_values(f_dg);
    r.sv_F_DG = sv(d - 2);
    r.extra_F_DG = sv(d - 1);
    r.sv_DG = singular_values(dg)(d - 2);
    r.det_zero = frame_det(f, g, df);
    r.det_lambda = lambdas.empty() ? r.det_zero : std::numeric_limits<double>::infinity();
    for (double lam : lambdas) r.det_lambda = std::min(r.det_lambda, frame_det(f, g, df + lam * dg));
    r.det_pencil = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pencil; ++k) {
      const double phi = -span + 2.0 * span * static_cast<double>(k) / static_cast<double>(pencil - 1);
      r.det_pencil = std::min(r.det_pencil, frame_det(f, g, std::cos(phi) * df + std::sin(phi) * dg));
    }
    per[i] = r;
  });

  RankReport rep;
  rep.d = d;
  rep.samples = samples.size();
  rep.min_sv_G_DF = rep.min_sv_F_DG = rep.min_sv_DG = std::numeric_limits<double>::infinity();
  rep.min_det_lambda = rep.min_det_pencil = rep.min_det_lambda_zero = std::numeric_limits<double>::infinity();
  const double tol = options.tolerance;
  for (std::size_t i = 0; i < per.size(); ++i) {
    const SampleRanks& r = per[i];
    rep.min_sv_G_DF = std::min(rep.min_sv_G_DF, r.sv_G_DF);
    rep.min_sv_F_DG = std::min(rep.min_sv_F_DG, r.sv_F_DG);
    rep.max_extra_sv_F_DG = std::max(rep.max_extra_sv_F_DG, r.extra_F_DG);
    rep.min_sv_DG = std::min(rep.min_sv_DG, r.sv_DG);
    rep.min_det_lambda = std::min(rep.min_det_lambda, r.det_lambda);
    rep.min_det_pencil = std::min(rep.min_det_pencil, r.det_pencil);
    rep.min_det_lambda_zero = std::min(rep.min_det_lambda_zero, r.det_zero);
    const bool ok = r.sv_G_DF > tol && r.sv_F_DG > tol && r.extra_F_DG < tol && r.sv_DG > tol &&
                    r.det_lambda > tol && r.det_pencil > tol;
    if (!ok) rep.offending.push_back(i);
  }
  rep.rank_G_DF = rep.min_sv_G_DF > tol;
  rep.rank_F_DG = rep.min_sv_F_DG > tol && rep.max_extra_sv_F_DG < tol;
  rep.rank_DG = rep.min_sv_DG > tol;
  rep.determinant = rep.min_det_lambda > tol && rep.min_det_pencil > tol;
  return rep;
}

std::vector<Eigen::VectorXd> chart_samples(int d, double radius, std::size_t count, std::uint64_t seed) {
  if (d < 2) throw PreconditionError("chart samples need d ≥ 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int m = d - 1;
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd y(m);
    for (int a = 0; a < m; ++a) y(a) = gauss(rng);
    const double r = radius * std::pow(unit(rng), 1.0 / m);
    const double len = y.norm();
    out.push_back(len > 0.0 ? Eigen::VectorXd(y * (r / len)) : Eigen::VectorXd::Zero(m));
  }
  return out;
}

// ------------------------------------------------------------ transversality

Eigen::MatrixXd projection_frame(const LinearVectorField& field, const Eigen::VectorXd& v) {
  const int d = field.dim();
  if (v.size() != d) throw PreconditionError("projection frame: v has the wrong dimension");
  Eigen::MatrixXd frame = Eigen::MatrixXd::Zero(2, d + 1);
  frame.row(0).head(d) = v.transpose() / kSqrt2;
  frame(0, d) = -1.0 / kSqrt2;
  frame.row(1).head(d) = field(v).transpose();
  return frame;
}

Eigen::Vector2d projection_pi(const LinearVectorField& field, const HemisphereChart& chart,
                              const Eigen::VectorXd& lambda, const Eigen::VectorXd& x) {
  if (x.size() != field.dim() + 1) throw PreconditionError("Π: x has the wrong dimension");
  return projection_frame(field, chart.point(lambda)) * x;
}

TransversalityValue transversality_determinant(const LinearVectorField& field,
                                               const HemisphereChart& chart,
                                               const Eigen::VectorXd& lambda,
                                               const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const int d = field.dim();
  if (chart.dim() != d) throw PreconditionError("field and chart dimensions differ");
  if (x.size() != d + 1 || y.size() != d + 1) throw PreconditionError("transversality: points need d+1 coordinates");
  const Eigen::VectorXd diff = x - y;
  const double len = diff.norm();
  if (!(len > 0.0)) throw PreconditionError("transversality needs distinct points x ≠ y");
  const Eigen::VectorXd z = diff / len;
  const Eigen::VectorXd zp = z.head(d);
  const Eigen::MatrixXd dv = chart.jacobian(lambda);
  TransversalityValue out;
  out.jacobian.resize(2, d - 1);
  out.jacobian.row(0) = (zp.transpose() * dv) / kSqrt2;
  out.jacobian.row(1) = (-(field.matrix() * zp)).transpose() * dv;
  out.determinant = (out.jacobian * out.jacobian.transpose()).determinant();
  out.pi = projection_pi(field, chart, lambda, z);
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> degenerate_pair(const HemisphereChart& chart,
                                                            const Eigen::VectorXd& lambda) {
  const int d = chart.dim();
  Eigen::VectorXd x(d + 1);
  x.head(d) = chart.point(lambda);
  x(d) = 1.0;
  x /= 2.0 * kSqrt2;
  return {x, -x};
}

// ------------------------------------------------------------ projection scan

HdScanReport hd_projection_scan(const AtomicMeasure& mu, const LinearVectorField& field,
                                const HemisphereChart& chart,
                                std::span<const Eigen::VectorXd> chart_points,
                                const ScanConfig& config) {
  const int d = field.dim();
  if (d < 4 || d % 2 != 0) throw DomainError("projection scan needs an even d ≥ 4");
  if (mu.dim() != static_cast<std::size_t>(d + 1)) {
    throw PreconditionError("projection scan: the measure must live in R^{d+1}");
  }
  if (chart_points.empty()) throw PreconditionError("projection scan needs at least one chart point");
  const FamilyFG fam = family_from_field(field, chart);
  HdScanReport rep;
  rep.d = d;
  rep.field = field.descriptor();
  rep.alpha = config.alpha;
  rep.bound = std::min(config.alpha, 2.0);
  rep.positive_area = config.alpha > 2.0;
  rep.rows.resize(chart_points.size());
  const std::size_t atoms = mu.size();
  parallel_for(chart_points.size(), [&](std::size_t i) {
    const Eigen::VectorXd& y = chart_points[i];
    const Eigen::MatrixXd frame = projection_frame(field, chart.point(y));
    std::vector<double> coords(2 * atoms);
    for (std::size_t a = 0; a < atoms; ++a) {
      const auto p = mu.point(a);
      const Eigen::Map<const Eigen::VectorXd> x(p.data(), d + 1);
      const Eigen::Vector2d q = frame * x;
      coords[2 * a] = q(0);
      coords[2 * a + 1] = q(1);
    }
    const DecayFit fit = box_dimension(coords, 2, config.box);
    HdScanRow row;
    row.chart_point = y;
    row.dim_est = fit.slope;
    row.r2 = fit.r2;
    row.bound = rep.bound;
    if (!fit.degenerate && fit.window_hi > 0) {
      const std::size_t last = fit.window_hi - 1;
      row.covered_area = fit.values[last] / (fit.scales[last] * fit.scales[last]);
    }
    Eigen::MatrixXd m(d + 1, d + 1);
    m << fam.F(y), fam.G(y), fam.DF(y);
    const Eigen::VectorXd sv = singular_values(m);
    row.frame_condition = sv(0) / sv(d);
    row.reliable = !fit.degenerate && fit.r2 >= config.r2_threshold;
    row.below = row.reliable && row.dim_est < rep.bound - config.tolerance;
    rep.rows[i] = std::move(row);
  });
  std::vector<double> estimates;
  std::size_t below = 0;
  for (const HdScanRow& row : rep.rows) {
    if (!row.reliable) continue;
    ++rep.reliable_count;
    estimates.push_back(row.dim_est);
    if (row.below) ++below;
  }
  if (estimates.empty()) {
    for (const HdScanRow& row : rep.rows) estimates.push_back(row.dim_est);
  }
  std::sort(estimates.begin(), estimates.end());
  const std::size_t n = estimates.size();
  rep.median_estimate = n % 2 ? estimates[n / 2] : 0.5 * (estimates[n / 2 - 1] + estimates[n / 2]);
  rep.below_fraction = rep.reliable_count > 0 ? static_cast<double>(below) / rep.reliable_count : 0.0;
  return rep;
}

}  // namespace projlab
