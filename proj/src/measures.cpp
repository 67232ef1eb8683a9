#include "projlab/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "projlab/errors.hpp"
#include "projlab/parallel.hpp"

namespace projlab {

AtomicMeasure::AtomicMeasure(std::size_t dim, std::vector<double> coords,
                             std::vector<double> weights)
    : dim_(dim), coords_(std::move(coords)), weights_(std::move(weights)) {
  if (dim_ == 0) throw PreconditionError("measure dimension must be positive");
  if (coords_.size() != dim_ * weights_.size()) {
    throw PreconditionError("coordinate count does not match weights");
  }
  double r2max = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw PreconditionError("atom weights must be finite and nonnegative");
    }
    total_mass_ += weights_[i];
    double r2 = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      const double c = coords_[i * dim_ + a];
      if (!std::isfinite(c)) throw PreconditionError("atom coordinates must be finite");
      r2 += c * c;
    }
    r2max = std::max(r2max, r2);
  }
  support_radius_ = std::sqrt(r2max);
}

AtomicMeasure AtomicMeasure::from_points(std::span<const Vec3> points,
                                         std::span<const double> weights) {
  if (points.size() != weights.size()) throw PreconditionError("points and weights differ in size");
  std::vector<double> coords;
  coords.reserve(points.size() * 3);
  for (const Vec3& p : points) coords.insert(coords.end(), {p.x, p.y, p.z});
  return AtomicMeasure(3, std::move(coords), {weights.begin(), weights.end()});
}

AtomicMeasure AtomicMeasure::uniform(std::span<const Vec3> points) {
  std::vector<double> w(points.size(), points.empty() ? 0.0 : 1.0 / points.size());
  return from_points(points, w);
}

Vec3 AtomicMeasure::vec3(std::size_t i) const {
  if (dim_ != 3) throw PreconditionError("measure is not three-dimensional");
  const double* p = coords_.data() + 3 * i;
  return {p[0], p[1], p[2]};
}

AtomicMeasure AtomicMeasure::scaled(double factor) const {
  std::vector<double> w = weights_;
  for (double& x : w) x *= factor;
  return AtomicMeasure(dim_, coords_, std::move(w));
}

// ---------------------------------------------------------------- IFS

double IFSSpec::similarity_dimension() const {
  if (maps.empty()) throw PreconditionError("IFS has no maps");
  auto pressure = [&](double s) {
    double sum = 0.0;
    for (const auto& m : maps) sum += std::pow(m.ratio, s);
    return sum - 1.0;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (pressure(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (pressure(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void IFSSpec::validate() const {
  if (maps.empty()) throw PreconditionError("IFS has no maps");
  if (dim == 0) throw PreconditionError("IFS dimension must be positive");
  for (const auto& m : maps) {
    if (!(m.ratio > 0.0 && m.ratio < 1.0)) throw PreconditionError("IFS ratios must lie in (0, 1)");
    if (m.translation.size() != dim) throw PreconditionError("IFS translation has wrong length");
    if (m.rotation && m.rotation->size() != dim * dim) {
      throw PreconditionError("IFS rotation has wrong size");
    }
  }
}

IFSSpec corner_ifs(std::size_t dim, const std::vector<std::vector<double>>& corners, double ratio) {
  IFSSpec spec;
  spec.dim = dim;
  for (const auto& c : corners) {
    SimilarityMap m;
    m.ratio = ratio;
    m.translation.resize(dim);
    for (std::size_t a = 0; a < dim; ++a) m.translation[a] = (1.0 - ratio) * c.at(a);
    spec.maps.push_back(std::move(m));
  }
  spec.target_alpha = spec.maps.empty() ? 0.0 : spec.similarity_dimension();
  // Corner maps of a cube with ratio below 1/2 have disjoint images inside the cube.
  spec.open_set_condition = ratio <= 0.5;
  return spec;
}

IFSSpec cube_corner_ifs(double alpha, std::uint64_t seed, bool random_orientation) {
  if (!(alpha > 0.0 && alpha < 3.0)) throw PreconditionError("cube-corner IFS needs alpha in (0, 3)");
  std::vector<std::vector<double>> corners;
  for (int i = 0; i < 8; ++i) {
    corners.push_back({(i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5});
  }
  IFSSpec spec = corner_ifs(3, corners, std::pow(8.0, -1.0 / alpha));
  spec.target_alpha = alpha;
  spec.seed = seed;
  spec.random_orientation = random_orientation;
  return spec;
}

namespace {

// Haar-random rotation of ℝ^dim from Gram–Schmidt on Gaussian columns.
std::vector<double> random_rotation(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> q(dim * dim);
  for (std::size_t c = 0; c < dim; ++c) {
    for (;;) {
      std::vector<double> v(dim);
      for (double& x : v) x = normal(rng);
      for (std::size_t p = 0; p < c; ++p) {
        double d = 0.0;
        for (std::size_t a = 0; a < dim; ++a) d += v[a] * q[a * dim + p];
        for (std::size_t a = 0; a < dim; ++a) v[a] -= d * q[a * dim + p];
      }
      double n = 0.0;
      for (double x : v) n += x * x;
      n = std::sqrt(n);
      if (n < 1e-6) continue;
      for (std::size_t a = 0; a < dim; ++a) q[a * dim + c] = v[a] / n;
      break;
    }
  }
  return q;
}

void apply_map(const SimilarityMap& m, std::size_t dim, const double* in, double* out) {
  for (std::size_t a = 0; a < dim; ++a) {
    double v = 0.0;
    if (m.rotation) {
      for (std::size_t b = 0; b < dim; ++b) v += (*m.rotation)[a * dim + b] * in[b];
    } else {
      v = in[a];
    }
    out[a] = m.ratio * v + m.translation[a];
  }
}

}  // namespace

AtomicMeasure ifs_generate(const IFSSpec& spec, int depth, std::size_t max_atoms) {
  spec.validate();
  if (depth < 1) throw PreconditionError("IFS depth must be at least 1");
  const std::size_t dim = spec.dim;
  const std::size_t m = spec.maps.size();
  double count = std::pow(static_cast<double>(m), depth);
  if (count > static_cast<double>(max_atoms)) {
    throw ResourceError("IFS would produce " + std::to_string(static_cast<long double>(count)) +
                        " atoms, budget is " + std::to_string(max_atoms));
  }

  // Fixed point of map 0 by iteration.
  std::vector<double> seed_point(dim, 0.0), tmp(dim);
  for (int it = 0; it < 2000; ++it) {
    apply_map(spec.maps[0], dim, seed_point.data(), tmp.data());
    std::swap(seed_point, tmp);
  }

  std::vector<double> current = seed_point;
  for (int level = 0; level < depth; ++level) {
    const std::size_t n = current.size() / dim;
    std::vector<double> next(n * m * dim);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < n; ++p) {
        apply_map(spec.maps[i], dim, current.data() + p * dim, next.data() + (i * n + p) * dim);
      }
    }
    current = std::move(next);
  }

  const std::size_t n = current.size() / dim;
  if (spec.random_orientation) {
    const std::vector<double> q = random_rotation(dim, spec.seed);
    std::vector<double> v(dim);
    for (std::size_t p = 0; p < n; ++p) {
      double* x = current.data() + p * dim;
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += q[a * dim + b] * x[b];
        v[a] = s;
      }
      std::copy(v.begin(), v.end(), x);
    }
  }
  return AtomicMeasure(dim, std::move(current), std::vector<double>(n, 1.0 / n));
}

// ---------------------------------------------------------------- ball masses

struct BallMassIndex::Impl {
  struct Node {
    std::size_t begin, end;
    std::int64_t left = -1, right = -1;
    double mass = 0.0;
  };
  std::size_t dim;
  std::vector<double> coords;  // permuted copy
  std::vector<double> weights;
  std::vector<Node> nodes;
  std::vector<double> box_lo, box_hi;  // per node, dim entries each

  std::size_t build(std::size_t begin, std::size_t end, std::size_t leaf,
                    std::vector<std::size_t>& order, const AtomicMeasure& mu) {
    const std::size_t id = nodes.size();
    nodes.push_back({begin, end});
    box_lo.resize((id + 1) * dim, 1e300);
    box_hi.resize((id + 1) * dim, -1e300);
    double mass = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      mass += mu.weight(order[i]);
      const auto p = mu.point(order[i]);
      for (std::size_t a = 0; a < dim; ++a) {
        box_lo[id * dim + a] = std::min(box_lo[id * dim + a], p[a]);
        box_hi[id * dim + a] = std::max(box_hi[id * dim + a], p[a]);
      }
    }
    nodes[id].mass = mass;
    if (end - begin <= leaf) return id;
    std::size_t axis = 0;
    double widest = -1.0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double w = box_hi[id * dim + a] - box_lo[id * dim + a];
      if (w > widest) {
        widest = w;
        axis = a;
      }
    }
    if (widest <= 0.0) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::size_t x, std::size_t y) {
                       return mu.point(x)[axis] < mu.point(y)[axis];
                     });
    const std::size_t l = build(begin, mid, leaf, order, mu);
    const std::size_t r = build(mid, end, leaf, order, mu);
    nodes[id].left = static_cast<std::int64_t>(l);
    nodes[id].right = static_cast<std::int64_t>(r);
    return id;
  }

  double query(std::size_t id, const double* c, double r2) const {
    const Node& node = nodes[id];
    double near2 = 0.0, far2 = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      const double lo = box_lo[id * dim + a] - c[a];
      const double hi = box_hi[id * dim + a] - c[a];
      const double dn = lo > 0.0 ? lo : (hi < 0.0 ? -hi : 0.0);
      const double df = std::max(std::abs(lo), std::abs(hi));
      near2 += dn * dn;
      far2 += df * df;
    }
    if (near2 > r2) return 0.0;
    if (far2 <= r2) return node.mass;
    if (node.left < 0) {
      double m = 0.0;
      for (std::size_t i = node.begin; i < node.end; ++i) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
          const double d = coords[i * dim + a] - c[a];
          d2 += d * d;
        }
        if (d2 <= r2) m += weights[i];
      }
      return m;
    }
    return query(static_cast<std::size_t>(node.left), c, r2) +
           query(static_cast<std::size_t>(node.right), c, r2);
  }
};

BallMassIndex::BallMassIndex(const AtomicMeasure& mu, std::size_t leaf_size)
    : impl_(std::make_unique<Impl>()) {
  impl_->dim = mu.dim();
  if (mu.empty()) return;
  std::vector<std::size_t> order(mu.size());
  std::iota(order.begin(), order.end(), 0);
  impl_->build(0, mu.size(), std::max<std::size_t>(leaf_size, 1), order, mu);
  impl_->coords.resize(mu.size() * mu.dim());
  impl_->weights.resize(mu.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto p = mu.point(order[i]);
    std::copy(p.begin(), p.end(), impl_->coords.begin() + i * mu.dim());
    impl_->weights[i] = mu.weight(order[i]);
  }
}

BallMassIndex::~BallMassIndex() = default;
BallMassIndex::BallMassIndex(BallMassIndex&&) noexcept = default;
BallMassIndex& BallMassIndex::operator=(BallMassIndex&&) noexcept = default;

double BallMassIndex::mass(std::span<const double> center, double radius) const {
  if (impl_->nodes.empty()) return 0.0;
  if (center.size() != impl_->dim) throw PreconditionError("ball center has wrong dimension");
  return impl_->query(0, center.data(), radius * radius);
}

std::vector<double> dyadic_radii(int lo, int hi) {
  std::vector<double> r;
  for (int k = lo; k <= hi; ++k) r.push_back(std::ldexp(1.0, -k));
  return r;
}

std::vector<double> frostman_constants(const AtomicMeasure& mu, std::span<const double> alphas,
                                       std::span<const double> radii, std::size_t max_centers) {
  if (radii.empty()) throw PreconditionError("frostman_constant needs at least one radius");
  for (double r : radii) {
    if (!(r > 0.0)) throw PreconditionError("radii must be positive");
  }
  std::vector<double> out(alphas.size(), 0.0);
  if (mu.empty()) return out;
  const BallMassIndex index(mu);
  const std::size_t n = mu.size();
  const std::size_t centers = max_centers == 0 ? n : std::min(n, max_centers);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (centers + kBlock - 1) / kBlock;
  std::vector<double> best(blocks * alphas.size(), 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t c = b * kBlock; c < std::min(centers, (b + 1) * kBlock); ++c) {
      const std::size_t i = centers == n ? c : c * n / centers;
      for (double r : radii) {
        const double m = index.mass(mu.point(i), r);
        for (std::size_t a = 0; a < alphas.size(); ++a) {
          double& slot = best[b * alphas.size() + a];
          slot = std::max(slot, m / std::pow(r, alphas[a]));
        }
      }
    }
  });
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t a = 0; a < alphas.size(); ++a)
      out[a] = std::max(out[a], best[b * alphas.size() + a]);
  return out;
}

double frostman_constant(const AtomicMeasure& mu, double alpha, std::span<const double> radii,
                         std::size_t max_centers) {
  return frostman_constants(mu, std::span<const double>(&alpha, 1), radii, max_centers).front();
}

RieszEnergy riesz_energy(const AtomicMeasure& mu, double s) {
  if (!(s > 0.0)) throw PreconditionError("Riesz exponent must be positive");
  const std::size_t n = mu.size();
  const std::size_t dim = mu.dim();
  const double* x = mu.coords().data();
  const double* w = mu.weights().data();
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> sums(blocks, 0.0);
  std::vector<std::size_t> coincident(blocks, 0);
  const double half = -0.5 * s;
  parallel_for(blocks, [&](std::size_t b) {
    double total = 0.0;
    std::size_t zeros = 0;
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
      double row = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
          const double d = x[i * dim + a] - x[j * dim + a];
          d2 += d * d;
        }
        if (d2 == 0.0) {
          ++zeros;
          continue;
        }
        row += w[j] * std::pow(d2, half);
      }
      total += w[i] * row;
    }
    sums[b] = total;
    coincident[b] = zeros;
  });
  RieszEnergy out;
  for (std::size_t b = 0; b < blocks; ++b) {
    out.value += sums[b];
    out.coincident_pairs += coincident[b];
  }
  out.value *= 2.0;
  return out;
}

AtomicMeasure pushforward_map(const AtomicMeasure& mu, std::size_t out_dim, const PointMap& f) {
  std::vector<double> coords(mu.size() * out_dim);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    f(mu.point(i), std::span<double>(coords.data() + i * out_dim, out_dim));
  }
  return AtomicMeasure(out_dim, std::move(coords), mu.weights());
}

// ---------------------------------------------------------------- container

void write_measure(const std::string& path, const AtomicMeasure& mu,
                   const std::string& sidecar_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  detail::put_magic(out);
  detail::put<std::uint32_t>(out, kContainerVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(mu.dim()));
  detail::put<std::uint64_t>(out, mu.size());
  for (std::size_t a = 0; a < mu.dim(); ++a) {
    for (std::size_t i = 0; i < mu.size(); ++i) detail::put<double>(out, mu.point(i)[a]);
  }
  for (double w : mu.weights()) detail::put<double>(out, w);
  if (!out) throw std::runtime_error("write failed for " + path);
  detail::write_sidecar(path, sidecar_json);
}

AtomicMeasure read_measure(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("cannot open measure file " + path);
  detail::expect_magic(in, path);
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kContainerVersion) {
    throw PreconditionError("unsupported container version " + std::to_string(version));
  }
  const auto dim = detail::get<std::uint32_t>(in);
  const auto count = detail::get<std::uint64_t>(in);
  if (dim == 0 || dim > 64) throw PreconditionError("container has invalid dimension");
  std::vector<double> coords(count * dim), weights(count);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t i = 0; i < count; ++i) coords[i * dim + a] = detail::get<double>(in);
  }
  for (auto& w : weights) w = detail::get<double>(in);
  return AtomicMeasure(dim, std::move(coords), std::move(weights));
}

}  // namespace projlab
