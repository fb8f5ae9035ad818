#include "wviab/measures.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"
#include "wviab/ot.hpp"
#include "wviab/rng.hpp"

namespace wviab {

namespace {

std::uint64_t hash_measure(int dim, const std::vector<double>& coords,
                           const std::vector<double>& weights) {
  std::int64_t d = dim;
  std::uint64_t h = fnv1a64(&d, sizeof(d));
  if (!coords.empty())
    h = fnv1a64(coords.data(), coords.size() * sizeof(double), h);
  if (!weights.empty())
    h = fnv1a64(weights.data(), weights.size() * sizeof(double), h);
  return h;
}

constexpr double kWeightSumTol = 1e-12;
constexpr double kMergeTol = 1e-12;

}  // namespace

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> coords,
                                   std::vector<double> weights)
    : dim_(dim) {
  if (dim <= 0) throw ValidationError("measure dimension must be positive");
  const std::size_t d = static_cast<std::size_t>(dim);
  if (weights.empty()) throw ValidationError("measure needs at least one atom");
  if (coords.size() != weights.size() * d)
    throw ValidationError("coordinate array does not match atom count");

  double sum = 0.0;
  std::size_t kept = 0;
  coords_.resize(coords.size());
  weights_.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double w = weights[i];
    if (!std::isfinite(w) || w < 0.0)
      throw ValidationError("weights must be finite and nonnegative");
    sum += w;
    if (w == 0.0) continue;  // zero-weight atoms are dropped
    for (std::size_t k = 0; k < d; ++k) {
      double c = coords[i * d + k];
      if (!std::isfinite(c))
        throw ValidationError("atom coordinates must be finite");
      coords_[kept * d + k] = c;
    }
    weights_[kept] = w;
    ++kept;
  }
  if (kept == 0)
    throw ValidationError("measure needs at least one atom of positive weight");
  if (std::fabs(sum - 1.0) > kWeightSumTol)
    throw ValidationError("weights must sum to one");
  coords_.resize(kept * d);
  weights_.resize(kept);
  hash_ = hash_measure(dim_, coords_, weights_);
}

EmpiricalMeasure EmpiricalMeasure::from_points(
    int dim, const std::vector<std::vector<double>>& points,
    std::vector<double> weights) {
  std::vector<double> coords;
  coords.reserve(points.size() * static_cast<std::size_t>(dim > 0 ? dim : 0));
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != dim)
      throw DimensionError("point dimension does not match measure dimension");
    coords.insert(coords.end(), p.begin(), p.end());
  }
  if (weights.empty()) {
    weights.assign(points.size(),
                   points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
  }
  return EmpiricalMeasure(dim, std::move(coords), std::move(weights));
}

EmpiricalMeasure EmpiricalMeasure::uniform(int dim, std::vector<double> coords) {
  if (dim <= 0) throw ValidationError("measure dimension must be positive");
  std::size_t d = static_cast<std::size_t>(dim);
  if (coords.empty() || coords.size() % d != 0)
    throw ValidationError("coordinate array does not match dimension");
  std::size_t n = coords.size() / d;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  return EmpiricalMeasure(dim, std::move(coords), std::move(w));
}

EmpiricalMeasure EmpiricalMeasure::dirac(std::vector<double> point) {
  int dim = static_cast<int>(point.size());
  return EmpiricalMeasure(dim, std::move(point), {1.0});
}

void TransportPlan::validate(const EmpiricalMeasure& mu,
                             const EmpiricalMeasure& nu, double tol) const {
  std::vector<double> row(mu.size(), 0.0), col(nu.size(), 0.0);
  double recomputed = 0.0;
  for (const auto& e : entries) {
    if (e.source >= mu.size() || e.target >= nu.size())
      throw ValidationError("plan entry indexes outside the measures");
    if (!(e.mass >= 0.0)) throw ValidationError("plan masses must be nonnegative");
    row[e.source] += e.mass;
    col[e.target] += e.mass;
    recomputed += e.mass * dist_sq(mu.point(e.source), nu.point(e.target));
  }
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (std::fabs(row[i] - mu.weight(i)) > tol)
      throw ValidationError("plan row sums disagree with source weights");
  for (std::size_t j = 0; j < nu.size(); ++j)
    if (std::fabs(col[j] - nu.weight(j)) > tol)
      throw ValidationError("plan column sums disagree with target weights");
  if (std::fabs(recomputed - cost) > tol * std::max(1.0, std::fabs(cost)))
    throw ValidationError("plan cost disagrees with its entries");
}

TangentVector::TangentVector(const EmpiricalMeasure& base,
                             std::vector<double> values)
    : dim_(base.dim()), values_(std::move(values)), base_hash_(base.content_hash()) {
  if (values_.size() != base.coords().size())
    throw DimensionError("tangent values do not match the base measure atoms");
  if (!all_finite(values_))
    throw ValidationError("tangent values must be finite");
}

TangentVector TangentVector::from_function(
    const EmpiricalMeasure& base,
    const std::function<void(std::span<const double>, std::span<double>)>& fn) {
  std::vector<double> vals(base.coords().size());
  std::size_t d = static_cast<std::size_t>(base.dim());
  for (std::size_t i = 0; i < base.size(); ++i)
    fn(base.point(i), std::span<double>(vals.data() + i * d, d));
  return TangentVector(base, std::move(vals));
}

TangentVector TangentVector::constant(const EmpiricalMeasure& base,
                                      std::span<const double> value) {
  if (static_cast<int>(value.size()) != base.dim())
    throw DimensionError("constant tangent value has wrong dimension");
  std::vector<double> vals(base.coords().size());
  std::size_t d = static_cast<std::size_t>(base.dim());
  for (std::size_t i = 0; i < base.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) vals[i * d + k] = value[k];
  return TangentVector(base, std::move(vals));
}

double TangentVector::l2_norm_sq(const EmpiricalMeasure& mu) const {
  if (mu.content_hash() != base_hash_)
    throw BaseMismatchError("tangent vector used with a foreign measure");
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    s += mu.weight(i) * norm_sq(value(i));
  return s;
}

W2Result wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim())
    throw DimensionError("cannot transport between different dimensions");
  const std::size_t m = mu.size(), n = nu.size();

  std::vector<double> cost(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cost[i * n + j] = dist_sq(mu.point(i), nu.point(j));

  auto is_uniform = [](const EmpiricalMeasure& q) {
    double u = 1.0 / static_cast<double>(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
      if (std::fabs(q.weight(i) - u) > 1e-13) return false;
    return true;
  };

  W2Result result;
  result.plan.optimal = true;
  if (m == n && is_uniform(mu) && is_uniform(nu)) {
    AssignmentResult a = solve_assignment(cost, n);
    result.plan.entries.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
      result.plan.entries.push_back({i, a.target_of[i], mu.weight(i)});
  } else {
    TransportResult t = solve_transport(mu.weights(), nu.weights(), cost);
    result.plan.entries.reserve(t.arcs.size());
    for (const auto& arc : t.arcs)
      result.plan.entries.push_back({arc.source, arc.target, arc.mass});
  }
  double total = 0.0;
  for (const auto& e : result.plan.entries)
    total += e.mass * cost[e.source * n + e.target];
  result.plan.cost = total;
  result.distance = std::sqrt(std::max(0.0, total));
  return result;
}

EmpiricalMeasure pushforward(
    const EmpiricalMeasure& mu, int out_dim,
    const std::function<void(std::span<const double>, std::span<double>)>& f) {
  if (out_dim <= 0) throw ValidationError("image dimension must be positive");
  const std::size_t d = static_cast<std::size_t>(out_dim);
  std::vector<double> merged_coords;
  std::vector<double> merged_weights;
  std::vector<double> image(d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    f(mu.point(i), image);
    if (!all_finite(image))
      throw NumericalError("pushforward map produced a non-finite image");
    std::size_t found = merged_weights.size();
    for (std::size_t r = 0; r < merged_weights.size(); ++r) {
      std::span<const double> rep(merged_coords.data() + r * d, d);
      if (dist(rep, image) <= kMergeTol) {
        found = r;
        break;
      }
    }
    if (found < merged_weights.size()) {
      merged_weights[found] += mu.weight(i);
    } else {
      merged_coords.insert(merged_coords.end(), image.begin(), image.end());
      merged_weights.push_back(mu.weight(i));
    }
  }
  return EmpiricalMeasure(out_dim, std::move(merged_coords),
                          std::move(merged_weights));
}

double moment2(const EmpiricalMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += mu.weight(i) * norm_sq(mu.point(i));
  return std::sqrt(s);
}

double support_radius(const EmpiricalMeasure& mu) {
  double r = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    r = std::max(r, norm(mu.point(i)));
  return r;
}

std::vector<double> mean(const EmpiricalMeasure& mu) {
  std::vector<double> m(static_cast<std::size_t>(mu.dim()), 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += mu.weight(i) * p[k];
  }
  return m;
}

double variance(const EmpiricalMeasure& mu) {
  std::vector<double> m = mean(mu);
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    s += mu.weight(i) * dist_sq(mu.point(i), m);
  return s;
}

EmpiricalMeasure perturb(const EmpiricalMeasure& mu, const TangentVector& xi,
                         double h) {
  if (xi.base_hash() != mu.content_hash())
    throw BaseMismatchError("tangent vector was sampled on a different measure");
  std::vector<double> coords(mu.coords());
  const auto& vals = xi.values();
  for (std::size_t k = 0; k < coords.size(); ++k) coords[k] += h * vals[k];
  return EmpiricalMeasure(mu.dim(), std::move(coords), mu.weights());
}

double superdifferential_gap(const EmpiricalMeasure& mu,
                             const EmpiricalMeasure& nu,
                             const TangentVector& xi, double h) {
  if (h <= 0.0) throw ValidationError("step h must be positive");
  W2Result base = wasserstein2(mu, nu);
  EmpiricalMeasure moved = perturb(mu, xi, h);
  double moved_d = wasserstein2(moved, nu).distance;

  double inner = 0.0;
  for (const auto& e : base.plan.entries) {
    auto x = mu.point(e.source);
    auto y = nu.point(e.target);
    auto v = xi.value(e.source);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += v[k] * (x[k] - y[k]);
    inner += e.mass * s;
  }
  double l2sq = xi.l2_norm_sq(mu);
  return 0.5 * moved_d * moved_d - 0.5 * base.distance * base.distance -
         h * inner - h * h * l2sq;
}

}  // namespace wviab
