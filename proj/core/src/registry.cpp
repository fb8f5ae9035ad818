#include "wviab/registry.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"
#include "wviab/measures.hpp"

namespace wviab {

namespace {

double frobenius(const std::vector<std::vector<double>>& A) {
  double acc = 0.0;
  for (const auto& row : A)
    for (double v : row) acc += v * v;
  return std::sqrt(acc);
}

std::vector<double> padded(const std::vector<double>& v, int dim,
                           const char* what) {
  if (v.empty()) return std::vector<double>(static_cast<std::size_t>(dim), 0.0);
  if (static_cast<int>(v.size()) != dim)
    throw ValidationError(std::string(what) + " does not match the dimension");
  for (double x : v)
    if (!std::isfinite(x))
      throw ValidationError(std::string(what) + " must be finite");
  return v;
}

void validate_spec(const FieldSpec& spec, int dim) {
  if (dim <= 0) throw ValidationError("field dimension must be positive");
  if (spec.kind == "zero" || spec.kind == "constant" ||
      spec.kind == "linear" || spec.kind == "attraction") {
    if (spec.kind == "constant" && spec.b.empty())
      throw ValidationError("constant field needs 'b'");
    if (spec.kind == "linear") {
      if (static_cast<int>(spec.A.size()) != dim)
        throw ValidationError("linear field needs a dim-by-dim 'A'");
      for (const auto& row : spec.A) {
        if (static_cast<int>(row.size()) != dim)
          throw ValidationError("linear field needs a dim-by-dim 'A'");
        for (double v : row)
          if (!std::isfinite(v))
            throw ValidationError("linear field 'A' must be finite");
      }
    }
    if (spec.kind == "attraction" &&
        (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda)))
      throw ValidationError("attraction needs lambda >= 0");
    return;
  }
  if (spec.kind == "interaction") {
    if (spec.kernel != "spring" && spec.kernel != "gaussian")
      throw ValidationError("unknown interaction kernel '" + spec.kernel +
                            "'");
    if (!(spec.kappa >= 0.0) || !std::isfinite(spec.kappa))
      throw ValidationError("interaction needs kappa >= 0");
    if (spec.kernel == "gaussian" &&
        (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)))
      throw ValidationError("gaussian kernel needs sigma > 0");
    return;
  }
  throw ValidationError("unknown field kind '" + spec.kind + "'");
}

std::string default_name(const FieldSpec& spec) {
  if (!spec.name.empty()) return spec.name;
  if (spec.kind == "interaction") return "interaction_" + spec.kernel;
  return spec.kind;
}

}  // namespace

DerivedConstants field_constants(const FieldSpec& spec, int dim) {
  validate_spec(spec, dim);
  DerivedConstants c;
  if (spec.kind == "zero") return c;
  if (spec.kind == "constant") {
    c.growth = norm(padded(spec.b, dim, "constant 'b'"));
    return c;
  }
  if (spec.kind == "linear") {
    const double an = frobenius(spec.A);
    const double bn = norm(padded(spec.b, dim, "linear 'b'"));
    c.growth = std::max(an, bn);
    c.lipschitz_x = an;
    return c;
  }
  if (spec.kind == "attraction") {
    const double tn = norm(padded(spec.target, dim, "attraction 'target'"));
    c.growth = spec.lambda * std::max(1.0, tn);
    c.lipschitz_x = spec.lambda;
    return c;
  }
  // interaction
  if (spec.kernel == "spring") {
    c.growth = spec.kappa;
  } else {
    c.growth = spec.kappa * spec.sigma * std::exp(-0.5);
  }
  c.lipschitz_x = spec.kappa;
  c.lipschitz_measure = spec.kappa;
  return c;
}

bool is_plain(const FieldSpec& spec) { return spec.kind != "interaction"; }

VelocityField build_plain_field(const FieldSpec& spec, int dim) {
  validate_spec(spec, dim);
  const DerivedConstants c = field_constants(spec, dim);
  const std::string name = default_name(spec);
  const std::size_t dd = static_cast<std::size_t>(dim);

  if (spec.kind == "zero") {
    return VelocityField(
        dim,
        [](double, std::span<const double>, std::span<double> out) {
          std::fill(out.begin(), out.end(), 0.0);
        },
        0.0, 0.0, name);
  }
  if (spec.kind == "constant") {
    std::vector<double> b = padded(spec.b, dim, "constant 'b'");
    return VelocityField(
        dim,
        [b](double, std::span<const double>, std::span<double> out) {
          std::copy(b.begin(), b.end(), out.begin());
        },
        c.growth, 0.0, name);
  }
  if (spec.kind == "linear") {
    std::vector<double> flat(dd * dd);
    for (std::size_t r = 0; r < dd; ++r)
      for (std::size_t cc = 0; cc < dd; ++cc) flat[r * dd + cc] = spec.A[r][cc];
    std::vector<double> b = padded(spec.b, dim, "linear 'b'");
    return VelocityField(
        dim,
        [flat, b, dd](double, std::span<const double> x,
                      std::span<double> out) {
          for (std::size_t r = 0; r < dd; ++r) {
            double acc = b[r];
            for (std::size_t cc = 0; cc < dd; ++cc)
              acc += flat[r * dd + cc] * x[cc];
            out[r] = acc;
          }
        },
        c.growth, c.lipschitz_x, name);
  }
  if (spec.kind == "attraction") {
    std::vector<double> target = padded(spec.target, dim, "attraction 'target'");
    const double lambda = spec.lambda;
    return VelocityField(
        dim,
        [target, lambda, dd](double, std::span<const double> x,
                             std::span<double> out) {
          for (std::size_t k = 0; k < dd; ++k)
            out[k] = lambda * (target[k] - x[k]);
        },
        c.growth, c.lipschitz_x, name);
  }
  throw ValidationError("field kind '" + spec.kind +
                        "' depends on the measure; freeze it via a member");
}

SetValuedDynamics::Member build_member(const FieldSpec& spec, int dim) {
  validate_spec(spec, dim);
  SetValuedDynamics::Member member;
  member.name = default_name(spec);

  if (is_plain(spec)) {
    VelocityField field = build_plain_field(spec, dim);
    member.freeze = [field](double, const EmpiricalMeasure&) { return field; };
    return member;
  }

  const std::size_t dd = static_cast<std::size_t>(dim);
  const double kappa = spec.kappa;
  const std::string name = member.name;
  if (spec.kernel == "spring") {
    member.freeze = [kappa, dd, dim, name](double,
                                           const EmpiricalMeasure& mu) {
      std::vector<double> m = mean(mu);
      const double sub = kappa * std::max(1.0, norm(m));
      return VelocityField(
          dim,
          [m, kappa, dd](double, std::span<const double> x,
                         std::span<double> out) {
            for (std::size_t k = 0; k < dd; ++k)
              out[k] = kappa * (m[k] - x[k]);
          },
          sub, kappa, name);
    };
    return member;
  }

  const double sigma = spec.sigma;
  member.freeze = [kappa, sigma, dd, dim, name](double,
                                                const EmpiricalMeasure& mu) {
    auto coords = std::make_shared<std::vector<double>>(mu.coords());
    auto weights = std::make_shared<std::vector<double>>(mu.weights());
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const double sub = kappa * sigma * std::exp(-0.5);
    return VelocityField(
        dim,
        [coords, weights, kappa, inv_two_sigma_sq, dd](
            double, std::span<const double> x, std::span<double> out) {
          std::fill(out.begin(), out.end(), 0.0);
          for (std::size_t j = 0; j < weights->size(); ++j) {
            double s2 = 0.0;
            for (std::size_t k = 0; k < dd; ++k) {
              const double diff = x[k] - (*coords)[j * dd + k];
              s2 += diff * diff;
            }
            const double coef =
                kappa * (*weights)[j] * std::exp(-s2 * inv_two_sigma_sq);
            for (std::size_t k = 0; k < dd; ++k)
              out[k] -= coef * (x[k] - (*coords)[j * dd + k]);
          }
        },
        sub, kappa, name);
  };
  return member;
}

SetValuedDynamics build_dynamics(const std::vector<FieldSpec>& family, int dim,
                                 double declared_growth,
                                 double declared_lipschitz_x,
                                 double declared_lipschitz_measure) {
  if (family.empty())
    throw ValidationError("dynamics family must be nonempty");
  DerivedConstants derived;
  std::vector<SetValuedDynamics::Member> members;
  members.reserve(family.size());
  for (const FieldSpec& spec : family) {
    const DerivedConstants c = field_constants(spec, dim);
    derived.growth = std::max(derived.growth, c.growth);
    derived.lipschitz_x = std::max(derived.lipschitz_x, c.lipschitz_x);
    derived.lipschitz_measure =
        std::max(derived.lipschitz_measure, c.lipschitz_measure);
    members.push_back(build_member(spec, dim));
  }
  auto pick = [](double declared, double fallback, const char* what) {
    if (declared < 0.0) return fallback;
    if (!std::isfinite(declared))
      throw ValidationError(std::string(what) + " must be finite");
    if (declared < fallback - 1e-9)
      throw ValidationError(std::string(what) +
                            " is below the derived family constant");
    return declared;
  };
  return SetValuedDynamics(
      dim, std::move(members),
      pick(declared_growth, derived.growth, "declared growth constant"),
      pick(declared_lipschitz_x, derived.lipschitz_x,
           "declared Lipschitz constant"),
      pick(declared_lipschitz_measure, derived.lipschitz_measure,
           "declared measure Lipschitz constant"));
}

}  // namespace wviab
