#include "wviab/flows.hpp"

#include <algorithm>
#include <cmath>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"
#include "wviab/parallel.hpp"
#include "wviab/rng.hpp"

namespace wviab {

VelocityField::VelocityField(int dim, Eval eval, double sublinearity,
                             double lipschitz, std::string name)
    : dim_(dim),
      eval_(std::move(eval)),
      sublinearity_(sublinearity),
      lipschitz_(lipschitz),
      name_(std::move(name)) {
  if (dim <= 0) throw ValidationError("field dimension must be positive");
  if (!eval_) throw ValidationError("field needs an evaluator");
  if (!(sublinearity_ >= 0.0) || !(lipschitz_ >= 0.0))
    throw ValidationError("field constants must be nonnegative");
}

void VelocityField::eval(double t, std::span<const double> x,
                         std::span<double> out) const {
  eval_(t, x, out);
}

void audit_field(const VelocityField& v, const FieldAuditParams& params) {
  Rng rng(params.seed);
  const std::size_t d = static_cast<std::size_t>(v.dim());
  std::vector<double> x(d), y(d), vx(d), vy(d);
  for (int s = 0; s < params.samples; ++s) {
    double t = rng.uniform(params.t_lo, params.t_hi);
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = rng.uniform(-params.radius, params.radius);
      y[k] = rng.uniform(-params.radius, params.radius);
    }
    v.eval(t, x, vx);
    v.eval(t, y, vy);
    if (!all_finite(vx) || !all_finite(vy))
      throw ValidationError("field audit: non-finite value");
    double bound_x = v.sublinearity() * (1.0 + norm(x));
    if (norm(vx) > bound_x * (1.0 + params.rel_tol) + 1e-12)
      throw ValidationError("field audit: growth bound violated");
    double gap = dist(vx, vy);
    double lip = v.lipschitz() * dist(x, y);
    if (gap > lip * (1.0 + params.rel_tol) + 1e-12)
      throw ValidationError("field audit: Lipschitz bound violated");
  }
}

VelocityField make_audited(int dim, VelocityField::Eval eval,
                           double sublinearity, double lipschitz,
                           std::string name, const FieldAuditParams& params) {
  VelocityField v(dim, std::move(eval), sublinearity, lipschitz,
                  std::move(name));
  audit_field(v, params);
  return v;
}

MeasureTrajectory::MeasureTrajectory(std::vector<double> times,
                                     std::vector<EmpiricalMeasure> states,
                                     TrajectoryMeta meta)
    : times_(std::move(times)), states_(std::move(states)), meta_(std::move(meta)) {
  if (times_.empty() || times_.size() != states_.size())
    throw ValidationError("trajectory needs matching times and states");
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1]))
      throw ValidationError("trajectory grid must be strictly increasing");
  int dim = states_.front().dim();
  std::size_t atoms = states_.front().size();
  for (const auto& s : states_) {
    if (s.dim() != dim)
      throw DimensionError("trajectory states must share one dimension");
    if (s.size() != atoms)
      throw ValidationError("trajectory atom count must stay constant");
  }
}

std::size_t MeasureTrajectory::index_of_time(double t, double tol) const {
  for (std::size_t k = 0; k < times_.size(); ++k)
    if (std::fabs(times_[k] - t) <= tol) return k;
  throw ValidationError("requested time is not a trajectory node");
}

AprioriConstants apriori_constants(double r, double M, double horizon) {
  if (r < 0.0 || M < 0.0 || horizon < 0.0)
    throw ValidationError("a-priori constants need nonnegative arguments");
  double radius = (1.0 + r) * std::exp(M * horizon) - 1.0;
  return {radius, 1.0 + radius};
}

namespace {

std::size_t substep_count(double span, double dt) {
  if (span <= 0.0) return 0;
  double raw = span / dt;
  std::size_t n = static_cast<std::size_t>(std::ceil(raw - 1e-12));
  return std::max<std::size_t>(n, 1);
}

}  // namespace

void rk4_cloud_advance(const CloudField& f, double t0, double t1, double dt,
                       std::vector<double>& pos) {
  if (dt <= 0.0) throw ValidationError("integrator step must be positive");
  if (t1 < t0) throw ValidationError("cannot integrate backwards");
  std::size_t steps = substep_count(t1 - t0, dt);
  if (steps == 0) return;
  double h = (t1 - t0) / static_cast<double>(steps);

  const std::size_t n = pos.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), stage(n);
  for (std::size_t s = 0; s < steps; ++s) {
    double t = t0 + h * static_cast<double>(s);
    f(t, pos, k1);
    for (std::size_t i = 0; i < n; ++i) stage[i] = pos[i] + 0.5 * h * k1[i];
    f(t + 0.5 * h, stage, k2);
    for (std::size_t i = 0; i < n; ++i) stage[i] = pos[i] + 0.5 * h * k2[i];
    f(t + 0.5 * h, stage, k3);
    for (std::size_t i = 0; i < n; ++i) stage[i] = pos[i] + h * k3[i];
    f(t + h, stage, k4);
    for (std::size_t i = 0; i < n; ++i)
      pos[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(pos))
      throw NumericalError("integration left the representable range");
  }
}

std::vector<double> flow_map(const VelocityField& v, double tau, double t,
                             std::span<const double> x0, double dt) {
  if (static_cast<int>(x0.size()) != v.dim())
    throw DimensionError("flow_map point dimension mismatch");
  std::vector<double> pos(x0.begin(), x0.end());
  CloudField f = [&v](double time, const std::vector<double>& p,
                      std::vector<double>& out) {
    v.eval(time, p, out);
  };
  rk4_cloud_advance(f, tau, t, dt, pos);
  return pos;
}

namespace {

CloudField atomwise_field(const VelocityField& v, std::size_t dim) {
  return [&v, dim](double t, const std::vector<double>& pos,
                   std::vector<double>& out) {
    std::size_t atoms = pos.size() / dim;
    parallel_for(atoms, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        std::span<const double> x(pos.data() + i * dim, dim);
        std::span<double> o(out.data() + i * dim, dim);
        v.eval(t, x, o);
      }
    });
  };
}

}  // namespace

MeasureTrajectory solve_continuity(const VelocityField& v, double tau, double T,
                                   const EmpiricalMeasure& mu_tau, double dt) {
  if (T < tau) throw ValidationError("horizon must not precede the start");
  if (v.dim() != mu_tau.dim())
    throw DimensionError("field and measure dimensions differ");
  std::size_t steps = substep_count(T - tau, dt);
  std::vector<double> grid;
  grid.reserve(steps + 1);
  double h = steps == 0 ? 0.0 : (T - tau) / static_cast<double>(steps);
  for (std::size_t k = 0; k <= steps; ++k)
    grid.push_back(k == steps ? T : tau + h * static_cast<double>(k));
  return solve_continuity_on_grid(v, grid, mu_tau, dt);
}

MeasureTrajectory solve_continuity_on_grid(const VelocityField& v,
                                           const std::vector<double>& grid,
                                           const EmpiricalMeasure& mu_tau,
                                           double dt) {
  if (grid.empty()) throw ValidationError("trajectory grid must be nonempty");
  if (v.dim() != mu_tau.dim())
    throw DimensionError("field and measure dimensions differ");
  const std::size_t d = static_cast<std::size_t>(mu_tau.dim());
  CloudField f = atomwise_field(v, d);

  std::vector<double> pos = mu_tau.coords();
  std::vector<double> times;
  std::vector<EmpiricalMeasure> states;
  times.reserve(grid.size());
  states.reserve(grid.size());
  times.push_back(grid.front());
  states.push_back(mu_tau);

  TrajectoryMeta meta;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    rk4_cloud_advance(f, grid[k - 1], grid[k], dt, pos);
    times.push_back(grid[k]);
    states.emplace_back(mu_tau.dim(), pos, mu_tau.weights());
    meta.step_provenance.push_back(v.name());
  }
  return MeasureTrajectory(std::move(times), std::move(states), std::move(meta));
}

}  // namespace wviab
