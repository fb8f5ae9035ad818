#include "wviab/geometry.hpp"

#include <cmath>

#include "wviab/rng.hpp"

namespace wviab {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(std::span<const double> a) { return dot(a, a); }

double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

double dist_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dist(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(dist_sq(a, b));
}

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<double> ball_sample(int dim, std::size_t count, double radius) {
  std::vector<double> out;
  if (dim <= 0 || count == 0) return out;
  out.reserve(count * static_cast<std::size_t>(dim));
  const double golden = 2.399963229728653322;  // 2*pi*(1 - 1/phi)
  if (dim == 1) {
    if (count == 1) {
      out.push_back(0.0);
      return out;
    }
    for (std::size_t i = 0; i < count; ++i) {
      double t = static_cast<double>(i) / static_cast<double>(count - 1);
      out.push_back(radius * (2.0 * t - 1.0));
    }
    return out;
  }
  if (dim == 2) {
    for (std::size_t i = 0; i < count; ++i) {
      double t = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      double r = radius * std::sqrt(t);
      double a = golden * static_cast<double>(i);
      out.push_back(r * std::cos(a));
      out.push_back(r * std::sin(a));
    }
    return out;
  }
  if (dim == 3) {
    for (std::size_t i = 0; i < count; ++i) {
      double t = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      double r = radius * std::cbrt(t);
      double z = 1.0 - 2.0 * t;
      double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = golden * static_cast<double>(i);
      out.push_back(r * s * std::cos(a));
      out.push_back(r * s * std::sin(a));
      out.push_back(r * z);
    }
    return out;
  }
  // Higher dimensions: seeded gaussian directions with a radial ramp.
  Rng rng(0xba11u);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> dir(static_cast<std::size_t>(dim));
    double n2 = 0.0;
    for (auto& v : dir) {
      v = rng.normal();
      n2 += v * v;
    }
    double n = std::sqrt(n2);
    if (n == 0.0) n = 1.0;
    double t = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
    double r = radius * std::pow(t, 1.0 / static_cast<double>(dim));
    for (double v : dir) out.push_back(r * v / n);
  }
  return out;
}

}  // namespace wviab
