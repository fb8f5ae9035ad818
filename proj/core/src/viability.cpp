#include "wviab/viability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"

namespace wviab {

namespace {

std::size_t substep_count(double span, double dt) {
  double raw = std::ceil(span / dt - 1e-12);
  return raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
}

/// Steps [ta, tb] with the same node arithmetic as the selection solver, so
/// a synthesized interval and its later replay agree bit for bit.
void advance_interval(const CloudField& f, double ta, double tb, double dt,
                      std::vector<double>& pos) {
  const std::size_t sub = substep_count(tb - ta, dt);
  double prev = ta;
  for (std::size_t i = 0; i < sub; ++i) {
    const double frac = static_cast<double>(i + 1) / static_cast<double>(sub);
    const double s1 = (i + 1 == sub) ? tb : ta + (tb - ta) * frac;
    rk4_cloud_advance(f, prev, s1, s1 - prev, pos);
    prev = s1;
  }
}

CloudField coupled(const SetValuedDynamics& dyn, const ControlMix& mix,
                   const std::vector<double>& weights) {
  const int d = dyn.dim();
  return [&dyn, &mix, &weights, d](double s, const std::vector<double>& p,
                                   std::vector<double>& out) {
    EmpiricalMeasure stage(d, p, weights);
    VelocityField v = dyn.field_of(s, stage, mix);
    const std::size_t dd = static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < weights.size(); ++i)
      v.eval(s, {p.data() + i * dd, dd}, {out.data() + i * dd, dd});
  };
}

}  // namespace

ConstraintSet::ConstraintSet(std::string name, DistanceFn distance,
                             ProjectFn project)
    : name_(std::move(name)),
      distance_(std::move(distance)),
      project_(std::move(project)) {
  if (name_.empty()) throw ValidationError("constraint set needs a name");
  if (!distance_) throw ValidationError("constraint set needs a distance");
  if (!project_) throw ValidationError("constraint set needs a projection");
}

double ConstraintSet::distance(const EmpiricalMeasure& mu) const {
  double d = distance_(mu);
  if (!std::isfinite(d) || d < 0.0)
    throw NumericalError("constraint distance must be finite and nonnegative");
  return d;
}

bool ConstraintSet::contains(const EmpiricalMeasure& mu, double tol) const {
  return distance(mu) <= tol;
}

EmpiricalMeasure ConstraintSet::project(const EmpiricalMeasure& mu) const {
  return project_(mu);
}

ConstraintSet ConstraintSet::second_moment_ball(double level) {
  if (!(level >= 0.0) || !std::isfinite(level))
    throw ValidationError("second moment level must be finite and >= 0");
  const double root = std::sqrt(level);
  auto dist_fn = [root](const EmpiricalMeasure& mu) {
    return std::max(0.0, moment2(mu) - root);
  };
  auto proj_fn = [root](const EmpiricalMeasure& mu) {
    const double m2 = moment2(mu);
    if (m2 <= root) return mu;
    const double s = root / m2;
    std::vector<double> coords = mu.coords();
    for (double& c : coords) c *= s;
    return EmpiricalMeasure(mu.dim(), std::move(coords), mu.weights());
  };
  return ConstraintSet("second_moment_ball", dist_fn, proj_fn);
}

ConstraintSet ConstraintSet::variance_ball(double level) {
  if (!(level >= 0.0) || !std::isfinite(level))
    throw ValidationError("variance level must be finite and >= 0");
  const double root = std::sqrt(level);
  auto dist_fn = [root](const EmpiricalMeasure& mu) {
    return std::max(0.0, std::sqrt(variance(mu)) - root);
  };
  auto proj_fn = [root](const EmpiricalMeasure& mu) {
    const double sd = std::sqrt(variance(mu));
    if (sd <= root) return mu;
    const double s = root / sd;
    const std::vector<double> m = mean(mu);
    std::vector<double> coords = mu.coords();
    const std::size_t dd = static_cast<std::size_t>(mu.dim());
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t c = 0; c < dd; ++c) {
        double& x = coords[i * dd + c];
        x = m[c] + s * (x - m[c]);
      }
    return EmpiricalMeasure(mu.dim(), std::move(coords), mu.weights());
  };
  return ConstraintSet("variance_ball", dist_fn, proj_fn);
}

ConstraintSet ConstraintSet::mean_norm_ball(double radius) {
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw ValidationError("mean norm radius must be finite and >= 0");
  auto dist_fn = [radius](const EmpiricalMeasure& mu) {
    return std::max(0.0, norm(mean(mu)) - radius);
  };
  auto proj_fn = [radius](const EmpiricalMeasure& mu) {
    const std::vector<double> m = mean(mu);
    const double mn = norm(m);
    if (mn <= radius) return mu;
    const double shift = radius / mn - 1.0;  // translate mean onto the sphere
    std::vector<double> coords = mu.coords();
    const std::size_t dd = static_cast<std::size_t>(mu.dim());
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t c = 0; c < dd; ++c)
        coords[i * dd + c] += shift * m[c];
    return EmpiricalMeasure(mu.dim(), std::move(coords), mu.weights());
  };
  return ConstraintSet("mean_norm_ball", dist_fn, proj_fn);
}

ConstraintSet ConstraintSet::mean_slice(std::vector<double> target_mean) {
  if (target_mean.empty())
    throw ValidationError("mean slice needs a target mean");
  for (double v : target_mean)
    if (!std::isfinite(v))
      throw ValidationError("mean slice target must be finite");
  auto check_dim = [n = target_mean.size()](const EmpiricalMeasure& mu) {
    if (static_cast<std::size_t>(mu.dim()) != n)
      throw DimensionError("measure does not match the mean slice dimension");
  };
  auto dist_fn = [target_mean, check_dim](const EmpiricalMeasure& mu) {
    check_dim(mu);
    const std::vector<double> m = mean(mu);
    return dist(m, target_mean);
  };
  auto proj_fn = [target_mean, check_dim](const EmpiricalMeasure& mu) {
    check_dim(mu);
    const std::vector<double> m = mean(mu);
    std::vector<double> coords = mu.coords();
    const std::size_t dd = static_cast<std::size_t>(mu.dim());
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t c = 0; c < dd; ++c)
        coords[i * dd + c] += target_mean[c] - m[c];
    return EmpiricalMeasure(mu.dim(), std::move(coords), mu.weights());
  };
  return ConstraintSet("mean_slice", dist_fn, proj_fn);
}

ContingentReport contingent_test(const SetValuedDynamics& dyn,
                                 const ConstraintSet& constraint, double t,
                                 const EmpiricalMeasure& mu,
                                 unsigned mix_resolution, double h0,
                                 int ladder) {
  if (mu.dim() != dyn.dim())
    throw DimensionError("measure does not match the dynamics");
  if (!(h0 > 0.0)) throw ValidationError("probe width must be positive");
  if (ladder < 2 || ladder > 40)
    throw ValidationError("probe ladder length out of range");

  const std::vector<ControlMix> grid =
      simplex_grid(dyn.family_size(), mix_resolution);

  // Freeze each mix once; the probe displaces along the frozen field.
  std::vector<TangentVector> directions;
  directions.reserve(grid.size());
  for (const ControlMix& mix : grid) {
    VelocityField v = dyn.field_of(t, mu, mix);
    directions.push_back(TangentVector::from_function(
        mu, [&](std::span<const double> x, std::span<double> o) {
          v.eval(t, x, o);
        }));
  }

  ContingentReport report;
  report.probe_h.resize(static_cast<std::size_t>(ladder));
  report.best_ratio.resize(static_cast<std::size_t>(ladder));
  report.best_mix.resize(static_cast<std::size_t>(ladder));
  for (int k = 0; k < ladder; ++k) {
    const double h = std::ldexp(h0, -k);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const double ratio =
          constraint.distance(perturb(mu, directions[m], h)) / h;
      if (ratio < best) {
        best = ratio;
        best_idx = m;
      }
    }
    report.probe_h[static_cast<std::size_t>(k)] = h;
    report.best_ratio[static_cast<std::size_t>(k)] = best;
    report.best_mix[static_cast<std::size_t>(k)] = best_idx;
  }
  report.ok = report.best_ratio.back() <=
              std::max(1e-8, 0.35 * report.best_ratio.front());
  return report;
}

ViabilityReport viable_trajectory(const SetValuedDynamics& dyn,
                                  const ConstraintSet& constraint,
                                  const EmpiricalMeasure& mu0, double horizon,
                                  double dt, const ViabilityOptions& opts) {
  if (mu0.dim() != dyn.dim())
    throw DimensionError("initial measure does not match the dynamics");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (opts.depth < 0 || opts.depth > 20)
    throw ValidationError("synthesis depth out of range");

  const double tol =
      opts.tolerance.value_or(1e-3 * (1.0 + support_radius(mu0)));
  if (constraint.distance(mu0) > tol)
    throw NotInConstraint("initial measure lies outside '" +
                          constraint.name() + "' beyond tolerance");

  const int d = dyn.dim();
  const double t0 = opts.start_time;
  const std::size_t pieces = std::size_t{1} << opts.depth;
  std::vector<double> grid_times(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i) {
    const double frac =
        static_cast<double>(i) / static_cast<double>(pieces);
    grid_times[i] = (i == pieces) ? t0 + horizon : t0 + horizon * frac;
  }

  const std::vector<ControlMix> mixes =
      simplex_grid(dyn.family_size(), opts.mix_resolution);
  const std::vector<double> weights = mu0.weights();

  std::vector<double> pos = mu0.coords();
  Selection sel;
  sel.grid = grid_times;
  sel.controls.reserve(pieces);

  std::vector<double> cand(pos.size());
  std::vector<double> best_pos(pos.size());
  for (std::size_t j = 0; j < pieces; ++j) {
    const double ta = grid_times[j];
    const double tb = grid_times[j + 1];
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t m = 0; m < mixes.size(); ++m) {
      cand = pos;
      CloudField f = coupled(dyn, mixes[m], weights);
      advance_interval(f, ta, tb, dt, cand);
      const double score =
          constraint.distance(EmpiricalMeasure(d, cand, weights));
      if (score < best) {
        best = score;
        best_idx = m;
        best_pos = cand;
      }
    }
    sel.controls.push_back(mixes[best_idx]);
    pos = best_pos;
  }

  MeasureTrajectory replay = solve_selection(dyn, sel, mu0, dt);

  // The replay must land exactly where the synthesis did; the solver and the
  // synthesis share their stepping arithmetic.
  const std::vector<double>& final_coords = replay.states().back().coords();
  double drift = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i)
    drift = std::max(drift, std::abs(final_coords[i] - pos[i]));
  if (drift > 1e-9)
    throw NumericalError("selection replay drifted from the synthesis");

  ViabilityReport report;
  report.tolerance = tol;
  report.constraint_distance.reserve(replay.nodes());
  for (const auto& st : replay.states())
    report.constraint_distance.push_back(constraint.distance(st));
  report.worst = *std::max_element(report.constraint_distance.begin(),
                                   report.constraint_distance.end());
  report.viable = report.worst <= tol;
  report.gronwall_margin = gronwall_monitor(
      replay, constraint, dyn.lipschitz_x() + dyn.lipschitz_measure());
  report.trajectory = std::move(replay);
  report.selection = std::move(sel);
  return report;
}

std::vector<double> gronwall_monitor(const MeasureTrajectory& traj,
                                     const ConstraintSet& constraint,
                                     double rate) {
  const std::size_t n = traj.nodes();
  if (n < 2)
    throw ValidationError("decay monitor needs at least two nodes");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = constraint.distance(traj.state(k));
  std::vector<double> margin(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = (k == 0) ? 0 : k - 1;
    const std::size_t hi = (k + 1 == n) ? k : k + 1;
    const double slope =
        (g[hi] - g[lo]) / (traj.time(hi) - traj.time(lo));
    margin[k] = slope - rate * g[k];
  }
  return margin;
}

}  // namespace wviab
