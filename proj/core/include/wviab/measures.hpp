#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace wviab {

/// Finitely supported probability measure on R^d: N atoms with strictly
/// positive weights summing to one. Coordinates are stored flattened
/// (atom-major). Immutable after construction; construction validates the
/// invariants and drops zero-weight atoms.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure(int dim, std::vector<double> coords,
                   std::vector<double> weights);

  static EmpiricalMeasure from_points(
      int dim, const std::vector<std::vector<double>>& points,
      std::vector<double> weights = {});

  /// Uniform weights 1/N over the given flattened coordinates.
  static EmpiricalMeasure uniform(int dim, std::vector<double> coords);

  static EmpiricalMeasure dirac(std::vector<double> point);

  int dim() const { return dim_; }
  std::size_t size() const { return weights_.size(); }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  double weight(std::size_t i) const { return weights_[i]; }

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Content fingerprint over (dim, coords, weights); identical clouds hash
  /// identically, and tangent vectors carry it to detect base mismatches.
  std::uint64_t content_hash() const { return hash_; }

 private:
  int dim_;
  std::vector<double> coords_;
  std::vector<double> weights_;
  std::uint64_t hash_;
};

struct PlanEntry {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
};

/// Coupling between two empirical measures, stored sparsely.
struct TransportPlan {
  std::vector<PlanEntry> entries;
  double cost = 0.0;    // sum of mass * squared distance
  bool optimal = false;

  /// Checks marginals against the two measures (tolerance 1e-10 on each row
  /// and column sum) and recomputes the cost. Throws ValidationError.
  void validate(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                double tol = 1e-10) const;
};

/// Velocity data sampled on the atoms of a fixed base measure; the base is
/// remembered by content hash and checked wherever the pairing matters.
class TangentVector {
 public:
  TangentVector(const EmpiricalMeasure& base, std::vector<double> values);

  static TangentVector from_function(
      const EmpiricalMeasure& base,
      const std::function<void(std::span<const double>, std::span<double>)>&
          fn);

  static TangentVector constant(const EmpiricalMeasure& base,
                                std::span<const double> value);

  int dim() const { return dim_; }
  std::size_t size() const { return values_.size() / static_cast<std::size_t>(dim_); }
  std::span<const double> value(std::size_t i) const {
    return {values_.data() + i * static_cast<std::size_t>(dim_),
            static_cast<std::size_t>(dim_)};
  }
  const std::vector<double>& values() const { return values_; }
  std::uint64_t base_hash() const { return base_hash_; }

  /// Squared L2(mu) norm; throws BaseMismatchError if mu is not the base.
  double l2_norm_sq(const EmpiricalMeasure& mu) const;

 private:
  int dim_;
  std::vector<double> values_;
  std::uint64_t base_hash_;
};

struct W2Result {
  double distance = 0.0;
  TransportPlan plan;
};

/// Exact 2-Wasserstein distance together with an optimal plan. Uniform
/// clouds of equal size go through the assignment solver; everything else
/// through the transportation simplex.
W2Result wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

/// Image measure under an atomwise map into R^out_dim. Atoms whose images
/// coincide within 1e-12 are merged (weights added, first image kept).
EmpiricalMeasure pushforward(
    const EmpiricalMeasure& mu, int out_dim,
    const std::function<void(std::span<const double>, std::span<double>)>& f);

/// Square root of the second moment, (sum_i w_i |x_i|^2)^{1/2}.
double moment2(const EmpiricalMeasure& mu);

/// Largest atom norm, max_i |x_i|.
double support_radius(const EmpiricalMeasure& mu);

std::vector<double> mean(const EmpiricalMeasure& mu);

/// Weighted squared deviation from the mean, sum_i w_i |x_i - mean|^2.
double variance(const EmpiricalMeasure& mu);

/// Atomwise displacement x_i + h * xi_i with unchanged weights (no merging).
EmpiricalMeasure perturb(const EmpiricalMeasure& mu, const TangentVector& xi,
                         double h);

/// Slack of the one-sided expansion of half the squared distance under the
/// displacement (Id + h xi):
///   gap = W2^2(perturbed, nu)/2 - W2^2(mu, nu)/2
///         - h * sum over an optimal plan of m_ij <xi(x_i), x_i - y_j>
///         - h^2 * |xi|^2_{L2(mu)}.
/// Nonpositive up to roundoff for every h > 0.
double superdifferential_gap(const EmpiricalMeasure& mu,
                             const EmpiricalMeasure& nu,
                             const TangentVector& xi, double h);

}  // namespace wviab
