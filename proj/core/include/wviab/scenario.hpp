#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wviab/inclusions.hpp"
#include "wviab/lyapunov.hpp"
#include "wviab/measures.hpp"
#include "wviab/registry.hpp"
#include "wviab/viability.hpp"

namespace wviab {

/// Constraint description as it appears in scenario files.
///
/// Types: "m2_ball" (level = squared-moment bound c), "variance_ball"
/// (level = variance bound), "mean_norm_ball" (level = |mean| bound),
/// "mean_slice" (target = prescribed mean vector). The "epigraph" type is
/// reserved for the decay synthesis, which builds it from the lyapunov
/// entry; it cannot be instantiated stand-alone.
struct ConstraintSpec {
  std::string type;
  double level = 1.0;
  std::vector<double> target;
};

/// Decay-functional description: type in {"m2sq", "variance",
/// "w2sq_to_target"}, rate rho > 0, and the target measure when the type
/// needs one.
struct LyapunovSpec {
  std::string type;
  double rho = 1.0;
  std::optional<EmpiricalMeasure> target;
};

/// One experiment: a control family with its constants, an initial
/// measure, the time grid parameters, and optional constraint / decay /
/// tracking sections.
///
/// JSON layout:
///   {
///     "dynamics": {"family": [<field entries>], "M":…, "Lambda":…, "L":…},
///     "mu0": <measure>, "horizon": T, "dt": …, "selection_depth": k,
///     "seed": …,
///     "constraint": {"type": …, "params": {…}},            (optional)
///     "lyapunov": {"type": …, "rho": …, "target": <measure>}, (optional)
///     "reference": <field entry>, "mu_track": <measure>,   (optional)
///     "out_prefix": "name"                                  (optional)
///   }
/// The declared constants M / Lambda / L are optional; when present they
/// must dominate the constants derived from the family.
struct Scenario {
  std::vector<FieldSpec> family;
  double growth = -1.0;
  double lipschitz_x = -1.0;
  double lipschitz_measure = -1.0;
  std::optional<EmpiricalMeasure> mu0;
  double horizon = 1.0;
  double dt = 0.01;
  int selection_depth = 4;
  std::uint64_t seed = 1;
  std::optional<ConstraintSpec> constraint;
  std::optional<LyapunovSpec> lyapunov;
  std::optional<FieldSpec> reference;
  std::optional<EmpiricalMeasure> mu_track;
  std::string out_prefix = "run";
  std::string input_hash;

  const EmpiricalMeasure& initial() const;
  int dim() const;
};

Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::string& path);

/// Instantiates the control family with the scenario's declared constants
/// (derived ones where not declared).
SetValuedDynamics scenario_dynamics(const Scenario& scenario);

ConstraintSet build_constraint(const ConstraintSpec& spec, int dim);
LyapunovFunctional build_functional(const LyapunovSpec& spec, int dim);

}  // namespace wviab
