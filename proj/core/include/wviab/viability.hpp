#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wviab/inclusions.hpp"
#include "wviab/measures.hpp"

namespace wviab {

/// Closed constraint set of measures with an exact distance in the
/// 2-Wasserstein metric and a metric projection. The built-in sets admit
/// closed forms; custom sets supply their own callables.
class ConstraintSet {
 public:
  using DistanceFn = std::function<double(const EmpiricalMeasure&)>;
  using ProjectFn = std::function<EmpiricalMeasure(const EmpiricalMeasure&)>;

  ConstraintSet(std::string name, DistanceFn distance, ProjectFn project);

  const std::string& name() const { return name_; }
  double distance(const EmpiricalMeasure& mu) const;
  bool contains(const EmpiricalMeasure& mu, double tol = 1e-12) const;
  EmpiricalMeasure project(const EmpiricalMeasure& mu) const;

  /// Measures with second moment at most level: radial scaling projects,
  /// and the distance is max(0, sqrt(second moment) - sqrt(level)).
  static ConstraintSet second_moment_ball(double level);

  /// Measures with variance at most level; scaling about the mean projects.
  static ConstraintSet variance_ball(double level);

  /// Measures whose mean has norm at most radius; translation projects.
  static ConstraintSet mean_norm_ball(double radius);

  /// Measures with a prescribed mean; translation projects.
  static ConstraintSet mean_slice(std::vector<double> target_mean);

 private:
  std::string name_;
  DistanceFn distance_;
  ProjectFn project_;
};

/// First-order membership test of the attainable velocity set against the
/// constraint: for each probe width h the control grid is scanned for the
/// mix minimizing distance((Id + h v) # mu) / h. Ratios decaying to zero
/// certify a tangent admissible direction at mu.
struct ContingentReport {
  std::vector<double> probe_h;
  std::vector<double> best_ratio;
  std::vector<std::size_t> best_mix;  // index into simplex_grid(family, res)
  bool ok = false;
};

ContingentReport contingent_test(const SetValuedDynamics& dyn,
                                 const ConstraintSet& constraint, double t,
                                 const EmpiricalMeasure& mu,
                                 unsigned mix_resolution = 8, double h0 = 0.25,
                                 int ladder = 6);

struct ViabilityOptions {
  double start_time = 0.0;
  unsigned mix_resolution = 8;
  /// Dyadic synthesis depth: the horizon splits into 2^depth intervals.
  int depth = 6;
  /// Certificate tolerance; defaults to 1e-3 * (1 + support_radius(mu0)).
  std::optional<double> tolerance;
};

/// Outcome of the dyadic synthesis: the replayed trajectory, the selection
/// that generated it, per-node constraint distances, and the decay monitor
/// margins. viable means every recorded node stayed within tolerance.
struct ViabilityReport {
  MeasureTrajectory trajectory;
  Selection selection;
  std::vector<double> constraint_distance;  // one per node
  std::vector<double> gronwall_margin;      // one per node
  double tolerance = 0.0;
  double worst = 0.0;
  bool viable = false;
};

/// Greedy dyadic synthesis of a constrained trajectory over [start, start+T]:
/// on each dyadic interval every control-grid mix is integrated and the one
/// with the smallest end-of-interval constraint distance is kept (ties keep
/// the earliest grid entry). The chosen selection is then replayed through
/// the selection solver and the replay is certified node by node. Throws
/// NotInConstraint if mu0 starts outside tolerance.
ViabilityReport viable_trajectory(const SetValuedDynamics& dyn,
                                  const ConstraintSet& constraint,
                                  const EmpiricalMeasure& mu0, double horizon,
                                  double dt, const ViabilityOptions& opts = {});

/// Per-node margins slope - rate * g for g(t) = distance(state(t)), with the
/// slope from central differences (one-sided at the ends). Nonpositive
/// margins witness the exponential no-escape estimate at the given rate.
std::vector<double> gronwall_monitor(const MeasureTrajectory& traj,
                                     const ConstraintSet& constraint,
                                     double rate);

}  // namespace wviab
