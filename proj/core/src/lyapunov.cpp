#include "wviab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"

namespace wviab {

LyapunovFunctional::LyapunovFunctional(std::string name, Eval eval)
    : name_(std::move(name)), eval_(std::move(eval)) {
  if (name_.empty()) throw ValidationError("functional needs a name");
  if (!eval_) throw ValidationError("functional needs an evaluator");
}

std::optional<double> LyapunovFunctional::try_eval(
    const EmpiricalMeasure& mu) const {
  return eval_(mu);
}

double LyapunovFunctional::eval(const EmpiricalMeasure& mu) const {
  std::optional<double> v = eval_(mu);
  if (!v)
    throw DomainError("functional '" + name_ +
                      "' is undefined at the given measure");
  if (!std::isfinite(*v))
    throw NumericalError("functional '" + name_ +
                         "' produced a non-finite value");
  return *v;
}

LyapunovFunctional LyapunovFunctional::second_moment_sq() {
  return LyapunovFunctional(
      "second_moment_sq",
      [](const EmpiricalMeasure& mu) -> std::optional<double> {
        double acc = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
          acc += mu.weight(i) * norm_sq(mu.point(i));
        return acc;
      });
}

LyapunovFunctional LyapunovFunctional::variance_fn() {
  return LyapunovFunctional(
      "variance", [](const EmpiricalMeasure& mu) -> std::optional<double> {
        return variance(mu);
      });
}

LyapunovFunctional LyapunovFunctional::w2_sq_to_target(
    EmpiricalMeasure target) {
  auto held = std::make_shared<EmpiricalMeasure>(std::move(target));
  return LyapunovFunctional(
      "w2_sq_to_target",
      [held](const EmpiricalMeasure& mu) -> std::optional<double> {
        if (mu.dim() != held->dim()) return std::nullopt;
        return wasserstein2(mu, *held).plan.cost;
      });
}

double directional_lower_derivative(const LyapunovFunctional& V,
                                    const MeasureTrajectory& traj,
                                    std::size_t node, int max_rungs) {
  if (node + 1 >= traj.nodes())
    throw ValidationError("lower derivative needs nodes ahead of the base");
  if (max_rungs < 1) throw ValidationError("lower derivative needs a rung");
  const double v0 = V.eval(traj.state(node));
  const double t0 = traj.time(node);
  double best = std::numeric_limits<double>::infinity();
  const std::size_t last =
      std::min(traj.nodes() - 1, node + static_cast<std::size_t>(max_rungs));
  for (std::size_t j = node + 1; j <= last; ++j) {
    const double q = (V.eval(traj.state(j)) - v0) / (traj.time(j) - t0);
    best = std::min(best, q);
  }
  return best;
}

EmpiricalMeasure extend_measure(const EmpiricalMeasure& mu, double y) {
  if (!std::isfinite(y))
    throw ValidationError("level coordinate must be finite");
  const std::size_t dd = static_cast<std::size_t>(mu.dim());
  std::vector<double> coords;
  coords.reserve(mu.size() * (dd + 1));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::span<const double> p = mu.point(i);
    coords.insert(coords.end(), p.begin(), p.end());
    coords.push_back(y);
  }
  return EmpiricalMeasure(mu.dim() + 1, std::move(coords), mu.weights());
}

EmpiricalMeasure marginal_drop_last(const EmpiricalMeasure& mu) {
  if (mu.dim() < 2)
    throw DimensionError("marginal needs at least two coordinates");
  const std::size_t dd = static_cast<std::size_t>(mu.dim());
  std::vector<double> coords;
  coords.reserve(mu.size() * (dd - 1));
  for (std::size_t i = 0; i < mu.size(); ++i) {
    std::span<const double> p = mu.point(i);
    coords.insert(coords.end(), p.begin(), p.end() - 1);
  }
  return EmpiricalMeasure(mu.dim() - 1, std::move(coords), mu.weights());
}

double common_y(const EmpiricalMeasure& mu, double tol) {
  if (mu.dim() < 2)
    throw DimensionError("level read needs at least two coordinates");
  const std::size_t dd = static_cast<std::size_t>(mu.dim());
  const double y0 = mu.coords()[dd - 1];
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (std::abs(mu.coords()[i * dd + dd - 1] - y0) > tol)
      throw ValidationError("atoms disagree on the level coordinate");
  return y0;
}

SetValuedDynamics extend_system(const SetValuedDynamics& dyn, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho))
    throw ValidationError("decay rate must be finite and nonnegative");
  auto base = std::make_shared<SetValuedDynamics>(dyn);
  const std::size_t d = static_cast<std::size_t>(dyn.dim());

  std::vector<SetValuedDynamics::Member> members;
  members.reserve(dyn.family_size());
  for (std::size_t u = 0; u < dyn.family_size(); ++u) {
    SetValuedDynamics::Member m;
    m.name = dyn.member(u).name;
    m.freeze = [base, u, d, rho](double t, const EmpiricalMeasure& ext_mu) {
      auto frozen = std::make_shared<VelocityField>(
          base->field_of(t, marginal_drop_last(ext_mu), u));
      auto eval = [frozen, d, rho](double s, std::span<const double> x,
                                   std::span<double> out) {
        frozen->eval(s, x.subspan(0, d), out.subspan(0, d));
        out[d] = -rho * x[d];
      };
      return VelocityField(static_cast<int>(d) + 1, std::move(eval),
                           frozen->sublinearity() + rho,
                           std::max(frozen->lipschitz(), rho),
                           frozen->name());
    };
    members.push_back(std::move(m));
  }
  return SetValuedDynamics(static_cast<int>(d) + 1, std::move(members),
                           dyn.sublinearity() + rho,
                           std::max(dyn.lipschitz_x(), rho),
                           dyn.lipschitz_measure() + rho);
}

ConstraintSet epigraph_constraint(const LyapunovFunctional& V) {
  auto dist_fn = [V](const EmpiricalMeasure& ext_mu) {
    const double y = common_y(ext_mu);
    return std::max(0.0, V.eval(marginal_drop_last(ext_mu)) - y);
  };
  auto proj_fn = [V](const EmpiricalMeasure& ext_mu) {
    const double y = common_y(ext_mu);
    const double val = V.eval(marginal_drop_last(ext_mu));
    if (val <= y) return ext_mu;
    const std::size_t dd = static_cast<std::size_t>(ext_mu.dim());
    std::vector<double> coords = ext_mu.coords();
    for (std::size_t i = 0; i < ext_mu.size(); ++i)
      coords[i * dd + dd - 1] = val;
    return EmpiricalMeasure(ext_mu.dim(), std::move(coords),
                            ext_mu.weights());
  };
  return ConstraintSet("epigraph(" + V.name() + ")", dist_fn, proj_fn);
}

DecayCertificate stable_trajectory(const SetValuedDynamics& dyn,
                                   const LyapunovFunctional& V, double rho,
                                   const EmpiricalMeasure& mu0, double horizon,
                                   double dt, const DecayOptions& opts) {
  if (mu0.dim() != dyn.dim())
    throw DimensionError("initial measure does not match the dynamics");
  if (!(rho > 0.0)) throw ValidationError("decay rate must be positive");
  if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (!(opts.window > 0.0)) throw ValidationError("window must be positive");

  const double v0 = V.eval(mu0);
  if (v0 < 0.0)
    throw ValidationError("decay certificates need a nonnegative functional");
  const double tol = opts.tolerance.value_or(1e-3 * std::max(1.0, v0));

  SetValuedDynamics ext = extend_system(dyn, rho);
  ConstraintSet epi = epigraph_constraint(V);

  std::vector<double> times{0.0};
  std::vector<EmpiricalMeasure> states{mu0};
  TrajectoryMeta meta;
  Selection sel;
  sel.grid = {0.0};

  EmpiricalMeasure current = mu0;
  while (horizon - times.back() > 1e-12) {
    const double t_a = times.back();
    const double span = std::min(opts.window, horizon - t_a);
    const double anchor = V.eval(current);

    ViabilityOptions vopts;
    vopts.start_time = t_a;
    vopts.mix_resolution = opts.mix_resolution;
    vopts.depth = opts.depth_per_window;
    vopts.tolerance = tol;
    ViabilityReport window = viable_trajectory(
        ext, epi, extend_measure(current, anchor), span, dt, vopts);

    const MeasureTrajectory& wt = window.trajectory;
    for (std::size_t k = 1; k < wt.nodes(); ++k) {
      times.push_back(wt.time(k));
      states.push_back(marginal_drop_last(wt.state(k)));
    }
    meta.step_provenance.insert(meta.step_provenance.end(),
                                wt.meta().step_provenance.begin(),
                                wt.meta().step_provenance.end());
    sel.grid.insert(sel.grid.end(), window.selection.grid.begin() + 1,
                    window.selection.grid.end());
    sel.controls.insert(sel.controls.end(), window.selection.controls.begin(),
                        window.selection.controls.end());
    current = states.back();
  }

  DecayCertificate cert;
  cert.rho = rho;
  cert.tolerance = tol;
  cert.value.resize(times.size());
  cert.envelope.resize(times.size());
  cert.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < times.size(); ++k) {
    cert.value[k] = V.eval(states[k]);
    cert.envelope[k] = v0 * std::exp(-rho * times[k]);
    cert.worst_excess =
        std::max(cert.worst_excess, cert.value[k] - cert.envelope[k]);
  }
  cert.certified = cert.worst_excess <= tol;

  cert.lower_derivative.resize(times.size() - 1);
  const int rungs = 6;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t last =
        std::min(times.size() - 1, k + static_cast<std::size_t>(rungs));
    for (std::size_t j = k + 1; j <= last; ++j)
      best = std::min(best,
                      (cert.value[j] - cert.value[k]) / (times[j] - times[k]));
    cert.lower_derivative[k] = best;
  }

  cert.trajectory =
      MeasureTrajectory(std::move(times), std::move(states), std::move(meta));
  cert.selection = std::move(sel);
  return cert;
}

}  // namespace wviab
