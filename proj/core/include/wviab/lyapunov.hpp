#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wviab/inclusions.hpp"
#include "wviab/measures.hpp"
#include "wviab/viability.hpp"

namespace wviab {

/// Proper functional on the space of measures. try_eval returns nullopt
/// outside the effective domain; eval throws DomainError there.
class LyapunovFunctional {
 public:
  using Eval = std::function<std::optional<double>(const EmpiricalMeasure&)>;

  LyapunovFunctional(std::string name, Eval eval);

  const std::string& name() const { return name_; }
  std::optional<double> try_eval(const EmpiricalMeasure& mu) const;
  double eval(const EmpiricalMeasure& mu) const;

  /// Second moment, sum of w_i |x_i|^2.
  static LyapunovFunctional second_moment_sq();

  /// Variance about the mean.
  static LyapunovFunctional variance_fn();

  /// Squared 2-Wasserstein distance to a fixed target; defined only for
  /// measures of the target's dimension.
  static LyapunovFunctional w2_sq_to_target(EmpiricalMeasure target);

 private:
  std::string name_;
  Eval eval_;
};

/// Lower forward difference quotient of V along the trajectory at a node:
/// the minimum of (V(state(k+j)) - V(state(k))) / (t_{k+j} - t_k) over the
/// next max_rungs recorded nodes. A numerical stand-in for the lower
/// one-sided derivative; decay certificates check it against -rho * V.
double directional_lower_derivative(const LyapunovFunctional& V,
                                    const MeasureTrajectory& traj,
                                    std::size_t node, int max_rungs = 6);

/// Measure on R^{d+1} whose atoms are (x_i, y) with a shared scalar level.
EmpiricalMeasure extend_measure(const EmpiricalMeasure& mu, double y);

/// Drops the last coordinate without merging atoms (the atom order and
/// count follow the input, so extended trajectories project node by node).
EmpiricalMeasure marginal_drop_last(const EmpiricalMeasure& mu);

/// The shared last coordinate of an extended measure; throws
/// ValidationError if the atoms disagree beyond tol.
double common_y(const EmpiricalMeasure& mu, double tol = 1e-9);

/// Control family on R^{d+1} driving the base coordinates with the original
/// members (frozen against the base marginal) and the level coordinate with
/// dy/dt = -rho y. Constants inflate accordingly.
SetValuedDynamics extend_system(const SetValuedDynamics& dyn, double rho);

/// Epigraph score set for extended measures: distance max(0, V(marginal) - y)
/// and projection lifting the level to V(marginal).
ConstraintSet epigraph_constraint(const LyapunovFunctional& V);

struct DecayOptions {
  unsigned mix_resolution = 8;
  /// Dyadic synthesis depth within each window.
  int depth_per_window = 4;
  double window = 1.0;
  /// Certificate tolerance; defaults to 1e-3 * max(1, V(mu0)).
  std::optional<double> tolerance;
};

/// Decay certificate at rate rho: the synthesized trajectory, the values
/// V(mu(t)), the envelope V(mu0) e^{-rho t}, and the lower difference
/// quotients. certified means every node satisfies value <= envelope + tol.
struct DecayCertificate {
  MeasureTrajectory trajectory;  // base-space states
  Selection selection;
  std::vector<double> value;             // one per node
  std::vector<double> envelope;          // one per node
  std::vector<double> lower_derivative;  // one per node except the last
  double rho = 0.0;
  double tolerance = 0.0;
  double worst_excess = 0.0;  // max(value - envelope), may be negative
  bool certified = false;
};

/// Windowed epigraph synthesis: the system is extended by a level
/// coordinate decaying at rate rho, the level is re-anchored to V(mu) at
/// every window start, and within each window the dyadic synthesis keeps
/// the extended state in the epigraph of V. The certificate then compares
/// V along the realized base trajectory with the exponential envelope.
DecayCertificate stable_trajectory(const SetValuedDynamics& dyn,
                                   const LyapunovFunctional& V, double rho,
                                   const EmpiricalMeasure& mu0, double horizon,
                                   double dt, const DecayOptions& opts = {});

}  // namespace wviab
