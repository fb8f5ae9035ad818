#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wviab {

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> a);
double norm(std::span<const double> a);
double dist_sq(std::span<const double> a, std::span<const double> b);
double dist(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> a);

/// Deterministic quasi-uniform sample of the closed ball B(0, radius) in
/// R^dim, returned as a flattened count-by-dim array. Low-discrepancy spiral
/// constructions for dim 1..3, seeded rejection-free sampling above that.
std::vector<double> ball_sample(int dim, std::size_t count, double radius);

}  // namespace wviab
