#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wviab/flows.hpp"
#include "wviab/measures.hpp"

namespace wviab {

/// Convex weights over a finite control family; a pure control is a one-hot
/// vector. Admissible fields are the convex combinations of the family
/// members, so the attainable velocity set has convex images by construction.
struct ControlMix {
  std::vector<double> weights;

  static ControlMix pure(std::size_t u, std::size_t family_size);

  bool is_pure(double tol = 1e-12) const;
  /// Index of the dominant weight.
  std::size_t top_index() const;
  std::string describe(const std::vector<std::string>& names) const;
};

/// Enumerates the weight vectors with k components on the grid of resolution
/// steps (all nonnegative multiples of 1/resolution summing to one), in
/// lexicographic order with the first component largest first. The pure
/// controls appear as the vertices of this list; the first entry is pure
/// control 0.
std::vector<ControlMix> simplex_grid(std::size_t k, unsigned resolution);

/// Finite family of measure-dependent velocity fields u -> v_u(t, mu, .)
/// together with declared constants: growth M in the envelope
/// |v| <= M (1 + |x| + moment2(mu)), spatial Lipschitz constant Lambda, and
/// measure-Lipschitz constant L matching fields across nearby measures.
class SetValuedDynamics {
 public:
  struct Member {
    std::string name;
    /// Freezes the member at (t, mu): performs any per-measure preparation
    /// and returns the spatial field x -> v_u(t, mu, x).
    std::function<VelocityField(double, const EmpiricalMeasure&)> freeze;
  };

  SetValuedDynamics(int dim, std::vector<Member> members, double sublinearity,
                    double lipschitz_x, double lipschitz_measure);

  int dim() const { return dim_; }
  std::size_t family_size() const { return members_.size(); }
  const Member& member(std::size_t u) const { return members_[u]; }
  std::vector<std::string> member_names() const;

  double sublinearity() const { return sublinearity_; }      // M
  double lipschitz_x() const { return lipschitz_x_; }        // Lambda
  double lipschitz_measure() const { return lipschitz_mu_; } // L

  /// Frozen blended field at (t, mu) for the given mix.
  VelocityField field_of(double t, const EmpiricalMeasure& mu,
                         const ControlMix& mix) const;
  VelocityField field_of(double t, const EmpiricalMeasure& mu,
                         std::size_t u) const;

 private:
  int dim_;
  std::vector<Member> members_;
  double sublinearity_;
  double lipschitz_x_;
  double lipschitz_mu_;
};

struct DynamicsAuditParams {
  double t_lo = 0.0;
  double t_hi = 1.0;
  double radius = 3.0;
  int measure_pairs = 6;
  int atoms = 5;
  int point_samples = 16;
  double tol = 1e-6;
  std::uint64_t seed = 0xd1a6u;
};

/// Randomized audit of the declared constants: growth and Lipschitz bounds
/// per member, and for sampled measure pairs the existence of a matching
/// member within L * W2 (exhaustive search over the family). Throws
/// ValidationError on a violation.
void audit_dynamics(const SetValuedDynamics& dyn,
                    const DynamicsAuditParams& params = {});

/// Piecewise-constant control schedule on a strictly increasing time grid:
/// one mix per grid interval.
struct Selection {
  std::vector<double> grid;
  std::vector<ControlMix> controls;

  void validate(std::size_t family_size) const;

  static Selection constant(double t0, double t1, ControlMix mix);
  /// Dyadic grid with 2^depth intervals and independently drawn pure
  /// controls.
  static Selection random_dyadic(double t0, double t1, int depth,
                                 std::size_t family_size, class Rng& rng);
};

/// Integrates the particle system under the selection: on each interval the
/// control is frozen while the field is re-resolved against the current
/// cloud at every RK4 stage. States are recorded on the dt-refined grid.
MeasureTrajectory solve_selection(const SetValuedDynamics& dyn,
                                  const Selection& sel,
                                  const EmpiricalMeasure& mu0, double dt);

/// Support-radius certificate for selection solutions: the envelope constant
/// M' = M (2 + R) is closed once with the single-field radius R, then fed
/// back through the Gronwall bound.
double ci_ball_radius(double r, double M, double horizon);

struct TrackingOptions {
  unsigned mix_resolution = 8;    // simplex grid fineness for the search
  std::size_t ball_points = 64;   // fixed quasi-uniform sample of B(0, r)
  double slack = 0.05;            // multiplicative headroom on the bound
};

/// Greedy tracking of a reference curve driven by the single-valued field w:
/// on every grid interval the mix whose frozen field is sup-closest to w
/// over the sample points (atoms of both clouds plus the ball sample) is
/// selected. realized[k] is the exact distance to the reference at node k,
/// mismatch[k] the best attainable sup distance at the reference cloud, and
/// bound[k] = (1+slack) e^{(Lambda+L)(t_k-t_0)} (realized[0] + sum of
/// mismatch increments).
struct TrackingResult {
  MeasureTrajectory trajectory;
  std::vector<double> realized;
  std::vector<double> mismatch;
  std::vector<double> bound;
  std::vector<ControlMix> controls;
};

TrackingResult filippov_track(const SetValuedDynamics& dyn,
                              const MeasureTrajectory& reference,
                              const VelocityField& w,
                              const EmpiricalMeasure& mu_tau, double dt,
                              const TrackingOptions& opts = {});

/// Endpoint sample of the states attainable at time t via random dyadic
/// selections. Deterministic for a given seed; trajectory i draws from the
/// stream (seed, i).
struct ReachableSample {
  double time = 0.0;
  double ball_radius = 0.0;  // a-priori support certificate for the endpoints
  std::vector<EmpiricalMeasure> measures;
  std::vector<Selection> selections;
};

ReachableSample reachable_sample(const SetValuedDynamics& dyn,
                                 const EmpiricalMeasure& mu0, double t,
                                 std::size_t n, double dt, std::uint64_t seed,
                                 int depth = 6);

/// Solution started at mu_tau whose initial velocity is the frozen member
/// field v_tau = v_u(tau, mu_tau): tracks the linear flow of v_tau and
/// certifies first-order tangency by the ratio ladder
///   ratio[k] = W2(mu(tau + h_k), (Id + h_k v_tau) # mu_tau) / h_k,
/// h_k = h0 2^{-k}. The ratios decrease toward zero for a solution with the
/// prescribed initial velocity.
struct InitialVelocityResult {
  MeasureTrajectory trajectory;
  std::vector<double> probe_h;
  std::vector<double> probe_ratio;
  bool certificate_ok = false;
};

InitialVelocityResult initial_velocity_solution(const SetValuedDynamics& dyn,
                                                double tau,
                                                const EmpiricalMeasure& mu_tau,
                                                std::size_t u_tau, double dt,
                                                double h0 = 0.5, int ladder = 8);

/// Single-valued view of a member along a precomputed trajectory: at time t
/// the member is frozen against the nearest recorded state. Useful as a
/// tracking reference when the member itself is measure-coupled. The view
/// borrows the dynamics and the trajectory; both must outlive it.
VelocityField field_along_trajectory(const SetValuedDynamics& dyn,
                                     std::size_t u,
                                     const MeasureTrajectory& traj);

}  // namespace wviab
