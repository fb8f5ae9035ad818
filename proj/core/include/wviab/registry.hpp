#pragma once

#include <string>
#include <vector>

#include "wviab/flows.hpp"
#include "wviab/inclusions.hpp"

namespace wviab {

/// Declarative description of one velocity field. Kinds:
///   zero                          v = 0
///   constant     (b)              v = b
///   linear       (A, b)           v = A x + b
///   attraction   (lambda, target) v = -lambda (x - target)
///   interaction  (kernel, kappa[, sigma])
///       spring:   v(x) = -kappa (x - mean(mu))
///       gaussian: v(x) = -kappa sum_j w_j (x - y_j) exp(-|x - y_j|^2 / 2 sigma^2)
/// Unused parameters are ignored for the other kinds.
struct FieldSpec {
  std::string kind;
  std::string name;  // instance label; defaults to kind
  std::vector<double> b;
  std::vector<std::vector<double>> A;
  double lambda = 1.0;
  std::vector<double> target;
  std::string kernel = "spring";
  double kappa = 1.0;
  double sigma = 1.0;
};

struct DerivedConstants {
  double growth = 0.0;       // M in |v| <= M (1 + |x| + moment2(mu))
  double lipschitz_x = 0.0;  // Lambda
  double lipschitz_measure = 0.0;  // L
};

/// Sharp closed-form constants for the described field in ambient dimension
/// dim.
DerivedConstants field_constants(const FieldSpec& spec, int dim);

/// Whether the field ignores the measure argument.
bool is_plain(const FieldSpec& spec);

/// Measure-independent field for the plain kinds; throws ValidationError
/// for interaction kinds.
VelocityField build_plain_field(const FieldSpec& spec, int dim);

/// Family member whose freeze resolves the measure coupling (a no-op for
/// plain kinds beyond capturing the parameters).
SetValuedDynamics::Member build_member(const FieldSpec& spec, int dim);

/// Dynamics over the given family. Declared constants (negative = derive)
/// must dominate the per-member derived ones.
SetValuedDynamics build_dynamics(const std::vector<FieldSpec>& family, int dim,
                                 double declared_growth = -1.0,
                                 double declared_lipschitz_x = -1.0,
                                 double declared_lipschitz_measure = -1.0);

}  // namespace wviab
