#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wviab/measures.hpp"

namespace wviab {

/// Time-dependent velocity field on R^d with declared growth and regularity
/// constants: |v(t,x)| <= sublinearity * (1 + |x|) and spatial Lipschitz
/// constant lipschitz on the region of interest.
class VelocityField {
 public:
  using Eval =
      std::function<void(double, std::span<const double>, std::span<double>)>;

  VelocityField(int dim, Eval eval, double sublinearity, double lipschitz,
                std::string name = "field");

  void eval(double t, std::span<const double> x, std::span<double> out) const;

  int dim() const { return dim_; }
  double sublinearity() const { return sublinearity_; }
  double lipschitz() const { return lipschitz_; }
  const std::string& name() const { return name_; }

 private:
  int dim_;
  Eval eval_;
  double sublinearity_;
  double lipschitz_;
  std::string name_;
};

struct FieldAuditParams {
  double t_lo = 0.0;
  double t_hi = 1.0;
  double radius = 4.0;
  int samples = 48;
  double rel_tol = 1e-9;
  std::uint64_t seed = 0x5eedf1e1du;
};

/// Randomized spot check of the declared constants over sampled times and
/// points. Throws ValidationError on a violation.
void audit_field(const VelocityField& v, const FieldAuditParams& params = {});

/// Constructs and audits in one step; the registry builders go through this.
VelocityField make_audited(int dim, VelocityField::Eval eval,
                           double sublinearity, double lipschitz,
                           std::string name,
                           const FieldAuditParams& params = {});

struct TrajectoryMeta {
  std::vector<std::string> notes;
  std::vector<std::string> step_provenance;  // one entry per recorded step
};

/// Time-indexed list of particle clouds on a strictly increasing grid with a
/// constant atom count (the recorded flows are bijections on atoms).
class MeasureTrajectory {
 public:
  /// Empty trajectory; fill by move-assigning a validated one.
  MeasureTrajectory() = default;

  MeasureTrajectory(std::vector<double> times,
                    std::vector<EmpiricalMeasure> states,
                    TrajectoryMeta meta = {});

  std::size_t nodes() const { return times_.size(); }
  double time(std::size_t k) const { return times_[k]; }
  const EmpiricalMeasure& state(std::size_t k) const { return states_[k]; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<EmpiricalMeasure>& states() const { return states_; }
  const TrajectoryMeta& meta() const { return meta_; }
  TrajectoryMeta& meta() { return meta_; }

  /// Index of the node at time t (within tol); throws ValidationError if the
  /// grid has no such node.
  std::size_t index_of_time(double t, double tol = 1e-9) const;

 private:
  std::vector<double> times_;
  std::vector<EmpiricalMeasure> states_;
  TrajectoryMeta meta_;
};

struct AprioriConstants {
  double radius = 0.0;   // support bound (1+r) e^{M h} - 1
  double modulus = 0.0;  // velocity envelope 1 + radius
};

/// Gronwall closures for initial support radius r, growth constant M and the
/// given horizon: trajectories started in B(0, r) stay in B(0, radius) and
/// move with speed at most modulus * M.
AprioriConstants apriori_constants(double r, double M, double horizon);

/// Characteristic flow of a single point: integrates dx/dt = v(t, x) from
/// tau to t with classical RK4 substeps of width at most dt.
std::vector<double> flow_map(const VelocityField& v, double tau, double t,
                             std::span<const double> x0, double dt);

/// Pushforward of mu_tau along the characteristic flow, recorded on the
/// uniform grid of width at most dt covering [tau, T].
MeasureTrajectory solve_continuity(const VelocityField& v, double tau, double T,
                                   const EmpiricalMeasure& mu_tau, double dt);

/// Same flow recorded on an arbitrary strictly increasing grid (the first
/// grid entry is the initial time).
MeasureTrajectory solve_continuity_on_grid(const VelocityField& v,
                                           const std::vector<double>& grid,
                                           const EmpiricalMeasure& mu_tau,
                                           double dt);

/// Derivative provider for a whole cloud: fills one velocity per atom for
/// stage positions given as a flattened array. Used by both the plain and
/// the measure-coupled integrators.
using CloudField = std::function<void(
    double, const std::vector<double>&, std::vector<double>&)>;

/// Advances flattened atom positions from t0 to t1 with RK4 substeps of
/// width at most dt, re-evaluating the provider at every stage. Throws
/// NumericalError if the state leaves the representable range.
void rk4_cloud_advance(const CloudField& f, double t0, double t1, double dt,
                       std::vector<double>& pos);

}  // namespace wviab
