#include "wviab/inclusions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>

#include "wviab/errors.hpp"
#include "wviab/geometry.hpp"
#include "wviab/parallel.hpp"
#include "wviab/rng.hpp"

namespace wviab {

namespace {

std::size_t substep_count(double span, double dt) {
  double raw = std::ceil(span / dt - 1e-12);
  return raw < 1.0 ? 1 : static_cast<std::size_t>(raw);
}

void check_weights(const std::vector<double>& w) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= -1e-15) || !std::isfinite(v))
      throw ValidationError("control weights must be nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("control weights must sum to one");
}

}  // namespace

ControlMix ControlMix::pure(std::size_t u, std::size_t family_size) {
  if (u >= family_size)
    throw ValidationError("pure control index out of range");
  ControlMix mix;
  mix.weights.assign(family_size, 0.0);
  mix.weights[u] = 1.0;
  return mix;
}

bool ControlMix::is_pure(double tol) const {
  if (weights.empty()) return false;
  return *std::max_element(weights.begin(), weights.end()) >= 1.0 - tol;
}

std::size_t ControlMix::top_index() const {
  if (weights.empty()) throw ValidationError("empty control mix");
  return static_cast<std::size_t>(
      std::max_element(weights.begin(), weights.end()) - weights.begin());
}

std::string ControlMix::describe(const std::vector<std::string>& names) const {
  if (weights.size() != names.size())
    throw ValidationError("control mix does not match the family size");
  if (is_pure()) return names[top_index()];
  std::string out;
  char buf[64];
  for (std::size_t u = 0; u < weights.size(); ++u) {
    if (weights[u] <= 1e-12) continue;
    std::snprintf(buf, sizeof(buf), "%.4g*", weights[u]);
    if (!out.empty()) out += '+';
    out += buf;
    out += names[u];
  }
  return out;
}

std::vector<ControlMix> simplex_grid(std::size_t k, unsigned resolution) {
  if (k == 0) throw ValidationError("simplex grid needs at least one member");
  if (resolution == 0)
    throw ValidationError("simplex grid resolution must be positive");
  std::vector<ControlMix> out;
  std::vector<unsigned> counts(k, 0);
  // Depth-first with the leading component largest first, so the list starts
  // at pure control 0 and visits every vertex before revisiting its faces.
  auto rec = [&](auto&& self, std::size_t pos, unsigned left) -> void {
    if (pos + 1 == k) {
      counts[pos] = left;
      ControlMix mix;
      mix.weights.resize(k);
      for (std::size_t i = 0; i < k; ++i)
        mix.weights[i] = static_cast<double>(counts[i]) / resolution;
      out.push_back(std::move(mix));
      return;
    }
    for (unsigned c = left + 1; c-- > 0;) {
      counts[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  rec(rec, 0, resolution);
  return out;
}

SetValuedDynamics::SetValuedDynamics(int dim, std::vector<Member> members,
                                     double sublinearity, double lipschitz_x,
                                     double lipschitz_measure)
    : dim_(dim),
      members_(std::move(members)),
      sublinearity_(sublinearity),
      lipschitz_x_(lipschitz_x),
      lipschitz_mu_(lipschitz_measure) {
  if (dim_ <= 0) throw ValidationError("dynamics dimension must be positive");
  if (members_.empty())
    throw ValidationError("dynamics needs at least one member");
  if (!(sublinearity_ >= 0.0) || !(lipschitz_x_ >= 0.0) ||
      !(lipschitz_mu_ >= 0.0) || !std::isfinite(sublinearity_) ||
      !std::isfinite(lipschitz_x_) || !std::isfinite(lipschitz_mu_))
    throw ValidationError("dynamics constants must be finite and nonnegative");
  for (std::size_t u = 0; u < members_.size(); ++u) {
    if (members_[u].name.empty())
      throw ValidationError("dynamics members need names");
    if (!members_[u].freeze)
      throw ValidationError("dynamics member '" + members_[u].name +
                            "' has no freeze function");
    for (std::size_t v = 0; v < u; ++v)
      if (members_[v].name == members_[u].name)
        throw ValidationError("duplicate member name '" + members_[u].name +
                              "'");
  }
}

std::vector<std::string> SetValuedDynamics::member_names() const {
  std::vector<std::string> names;
  names.reserve(members_.size());
  for (const auto& m : members_) names.push_back(m.name);
  return names;
}

VelocityField SetValuedDynamics::field_of(double t, const EmpiricalMeasure& mu,
                                          std::size_t u) const {
  if (u >= members_.size())
    throw ValidationError("member index out of range");
  if (mu.dim() != dim_)
    throw DimensionError("measure dimension does not match the dynamics");
  VelocityField v = members_[u].freeze(t, mu);
  if (v.dim() != dim_)
    throw DimensionError("member '" + members_[u].name +
                         "' froze to the wrong dimension");
  return v;
}

VelocityField SetValuedDynamics::field_of(double t, const EmpiricalMeasure& mu,
                                          const ControlMix& mix) const {
  if (mix.weights.size() != members_.size())
    throw ControlGridMismatch("control mix does not match the family size");
  check_weights(mix.weights);

  std::size_t active = 0, last = 0;
  for (std::size_t u = 0; u < mix.weights.size(); ++u)
    if (mix.weights[u] > 1e-15) {
      ++active;
      last = u;
    }
  if (active == 0) throw ValidationError("control mix has no active member");
  if (active == 1 && std::abs(mix.weights[last] - 1.0) <= 1e-12)
    return field_of(t, mu, last);

  auto parts = std::make_shared<std::vector<VelocityField>>();
  auto coeffs = std::make_shared<std::vector<double>>();
  double sub = 0.0, lip = 0.0;
  std::string name;
  for (std::size_t u = 0; u < mix.weights.size(); ++u) {
    if (mix.weights[u] <= 1e-15) continue;
    parts->push_back(field_of(t, mu, u));
    coeffs->push_back(mix.weights[u]);
    sub += mix.weights[u] * parts->back().sublinearity();
    lip += mix.weights[u] * parts->back().lipschitz();
  }
  name = mix.describe(member_names());

  const int d = dim_;
  auto eval = [parts, coeffs, d](double s, std::span<const double> x,
                                 std::span<double> out) {
    double stack[8];
    std::vector<double> heap;
    std::span<double> tmp;
    if (d <= 8) {
      tmp = {stack, static_cast<std::size_t>(d)};
    } else {
      heap.resize(static_cast<std::size_t>(d));
      tmp = heap;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t p = 0; p < parts->size(); ++p) {
      (*parts)[p].eval(s, x, tmp);
      for (int k = 0; k < d; ++k)
        out[static_cast<std::size_t>(k)] +=
            (*coeffs)[p] * tmp[static_cast<std::size_t>(k)];
    }
  };
  return VelocityField(dim_, std::move(eval), sub, lip, std::move(name));
}

void audit_dynamics(const SetValuedDynamics& dyn,
                    const DynamicsAuditParams& params) {
  Rng rng(params.seed);
  const int d = dyn.dim();
  const std::size_t dd = static_cast<std::size_t>(d);
  const double box = params.radius / std::sqrt(static_cast<double>(d));

  auto random_measure = [&]() {
    std::vector<double> coords(static_cast<std::size_t>(params.atoms) * dd);
    std::vector<double> w(static_cast<std::size_t>(params.atoms));
    for (double& c : coords) c = rng.uniform(-box, box);
    double sum = 0.0;
    for (double& wi : w) {
      wi = rng.uniform(0.2, 1.0);
      sum += wi;
    }
    for (double& wi : w) wi /= sum;
    return EmpiricalMeasure(d, std::move(coords), std::move(w));
  };

  std::vector<double> x(dd), y(dd), vx(dd), vy(dd), wx(dd);
  for (int pair = 0; pair < params.measure_pairs; ++pair) {
    const double t = rng.uniform(params.t_lo, params.t_hi);
    EmpiricalMeasure mu = random_measure();
    EmpiricalMeasure nu = random_measure();
    const double w2 = wasserstein2(mu, nu).distance;
    const double m2_mu = moment2(mu);

    std::vector<VelocityField> at_mu, at_nu;
    for (std::size_t u = 0; u < dyn.family_size(); ++u) {
      at_mu.push_back(dyn.field_of(t, mu, u));
      at_nu.push_back(dyn.field_of(t, nu, u));
    }

    for (std::size_t u = 0; u < dyn.family_size(); ++u) {
      // Per candidate member at nu: the sup over sample points of the gap to
      // member u at mu. The family matches if some candidate stays small.
      std::vector<double> sup_gap(dyn.family_size(), 0.0);
      for (int s = 0; s < params.point_samples; ++s) {
        for (std::size_t k = 0; k < dd; ++k) {
          x[k] = rng.uniform(-box, box);
          y[k] = rng.uniform(-box, box);
        }
        at_mu[u].eval(t, x, vx);
        at_mu[u].eval(t, y, vy);
        if (!all_finite(vx) || !all_finite(vy))
          throw ValidationError("dynamics audit: member '" +
                                dyn.member(u).name +
                                "' produced a non-finite value");
        const double envelope =
            dyn.sublinearity() * (1.0 + norm(x) + m2_mu);
        if (norm(vx) > envelope + params.tol)
          throw ValidationError("dynamics audit: member '" +
                                dyn.member(u).name +
                                "' violates the growth envelope");
        if (dist(vx, vy) > dyn.lipschitz_x() * dist(x, y) + params.tol)
          throw ValidationError("dynamics audit: member '" +
                                dyn.member(u).name +
                                "' violates the spatial Lipschitz bound");
        for (std::size_t v = 0; v < dyn.family_size(); ++v) {
          at_nu[v].eval(t, x, wx);
          double gap = dist(vx, wx);
          if (gap > sup_gap[v]) sup_gap[v] = gap;
        }
      }
      // The family at nu must offer some member matching u within L * W2.
      double closest = *std::min_element(sup_gap.begin(), sup_gap.end());
      if (closest > dyn.lipschitz_measure() * w2 + params.tol)
        throw ValidationError(
            "dynamics audit: no member tracks '" + dyn.member(u).name +
            "' within the declared measure Lipschitz bound");
    }
  }
}

void Selection::validate(std::size_t family_size) const {
  if (grid.size() < 2)
    throw ValidationError("selection grid needs at least two nodes");
  for (double g : grid)
    if (!std::isfinite(g))
      throw ValidationError("selection grid must be finite");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1]))
      throw ValidationError("selection grid must be strictly increasing");
  if (controls.size() + 1 != grid.size())
    throw ControlGridMismatch("selection needs one control per grid interval");
  for (const auto& mix : controls) {
    if (mix.weights.size() != family_size)
      throw ControlGridMismatch("control mix does not match the family size");
    check_weights(mix.weights);
  }
}

Selection Selection::constant(double t0, double t1, ControlMix mix) {
  if (!(t0 < t1)) throw ValidationError("selection needs t0 < t1");
  Selection sel;
  sel.grid = {t0, t1};
  sel.controls = {std::move(mix)};
  return sel;
}

Selection Selection::random_dyadic(double t0, double t1, int depth,
                                   std::size_t family_size, Rng& rng) {
  if (!(t0 < t1)) throw ValidationError("selection needs t0 < t1");
  if (depth < 0 || depth > 24)
    throw ValidationError("dyadic depth out of range");
  const std::size_t pieces = std::size_t{1} << depth;
  Selection sel;
  sel.grid.reserve(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i) {
    double frac = static_cast<double>(i) / static_cast<double>(pieces);
    sel.grid.push_back(i == pieces ? t1 : t0 + (t1 - t0) * frac);
  }
  sel.controls.reserve(pieces);
  for (std::size_t i = 0; i < pieces; ++i)
    sel.controls.push_back(
        ControlMix::pure(rng.index(family_size), family_size));
  return sel;
}

namespace {

/// Derivative provider that rebuilds the cloud measure at every stage and
/// freezes the mix against it, so the coupling sees the stage positions.
CloudField coupled_field(const SetValuedDynamics& dyn, const ControlMix& mix,
                         const std::vector<double>& weights) {
  const int d = dyn.dim();
  return [&dyn, &mix, &weights, d](double s, const std::vector<double>& p,
                                   std::vector<double>& out) {
    EmpiricalMeasure stage(d, p, weights);
    VelocityField v = dyn.field_of(s, stage, mix);
    const std::size_t dd = static_cast<std::size_t>(d);
    parallel_for(weights.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::span<const double> xi{p.data() + i * dd, dd};
        std::span<double> oi{out.data() + i * dd, dd};
        v.eval(s, xi, oi);
      }
    });
  };
}

}  // namespace

MeasureTrajectory solve_selection(const SetValuedDynamics& dyn,
                                  const Selection& sel,
                                  const EmpiricalMeasure& mu0, double dt) {
  sel.validate(dyn.family_size());
  if (mu0.dim() != dyn.dim())
    throw DimensionError("initial measure does not match the dynamics");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");

  const int d = dyn.dim();
  std::vector<double> pos = mu0.coords();
  const std::vector<double> weights = mu0.weights();
  const std::vector<std::string> names = dyn.member_names();

  std::vector<double> times{sel.grid.front()};
  std::vector<EmpiricalMeasure> states{mu0};
  TrajectoryMeta meta;

  for (std::size_t j = 0; j + 1 < sel.grid.size(); ++j) {
    const double ta = sel.grid[j];
    const double tb = sel.grid[j + 1];
    const ControlMix& mix = sel.controls[j];
    const std::string prov = mix.describe(names);
    CloudField f = coupled_field(dyn, mix, weights);
    const std::size_t sub = substep_count(tb - ta, dt);
    for (std::size_t i = 0; i < sub; ++i) {
      const double frac = static_cast<double>(i + 1) / static_cast<double>(sub);
      const double s0 = times.back();
      const double s1 = (i + 1 == sub) ? tb : ta + (tb - ta) * frac;
      rk4_cloud_advance(f, s0, s1, s1 - s0, pos);
      times.push_back(s1);
      states.emplace_back(d, pos, weights);
      meta.step_provenance.push_back(prov);
    }
  }
  return MeasureTrajectory(std::move(times), std::move(states),
                           std::move(meta));
}

double ci_ball_radius(double r, double M, double horizon) {
  if (!(r >= 0.0) || !(M >= 0.0) || !(horizon >= 0.0))
    throw ValidationError("ball certificate needs nonnegative inputs");
  const double single = (1.0 + r) * std::exp(M * horizon) - 1.0;
  const double closed = M * (2.0 + single);
  return (1.0 + r) * std::exp(closed * horizon) - 1.0;
}

TrackingResult filippov_track(const SetValuedDynamics& dyn,
                              const MeasureTrajectory& reference,
                              const VelocityField& w,
                              const EmpiricalMeasure& mu_tau, double dt,
                              const TrackingOptions& opts) {
  if (reference.nodes() < 2)
    throw ValidationError("tracking needs a reference with at least two nodes");
  const int d = dyn.dim();
  if (reference.state(0).dim() != d || w.dim() != d || mu_tau.dim() != d)
    throw DimensionError("tracking inputs disagree on the dimension");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  if (opts.mix_resolution == 0)
    throw ValidationError("mix resolution must be positive");

  const std::size_t K = reference.nodes();
  const std::size_t dd = static_cast<std::size_t>(d);
  const std::size_t fam = dyn.family_size();
  const double t0 = reference.time(0);
  const double horizon = reference.time(K - 1) - t0;

  double r0 = support_radius(mu_tau);
  for (std::size_t k = 0; k < K; ++k)
    r0 = std::max(r0, support_radius(reference.state(k)));
  const double ball_r = ci_ball_radius(r0, dyn.sublinearity(), horizon);
  const std::vector<double> ball = ball_sample(d, opts.ball_points, ball_r);

  const std::vector<ControlMix> grid = simplex_grid(fam, opts.mix_resolution);
  const std::vector<std::string> names = dyn.member_names();
  const double rate = dyn.lipschitz_x() + dyn.lipschitz_measure();

  std::vector<double> pos = mu_tau.coords();
  const std::vector<double> weights = mu_tau.weights();

  TrackingResult result;
  result.realized.resize(K);
  result.bound.resize(K);
  result.mismatch.resize(K - 1);
  result.controls.reserve(K - 1);

  std::vector<double> times{t0};
  std::vector<EmpiricalMeasure> states{mu_tau};
  TrajectoryMeta meta;

  result.realized[0] =
      wasserstein2(mu_tau, reference.state(0)).distance;
  result.bound[0] = (1.0 + opts.slack) * result.realized[0];
  double integral = 0.0;

  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double tk = reference.time(k);
    const double tk1 = reference.time(k + 1);
    const EmpiricalMeasure& ref_k = reference.state(k);
    EmpiricalMeasure tracked(d, pos, weights);

    // Sample set: both clouds' atoms plus the fixed ball sample.
    std::vector<double> samples;
    samples.reserve(tracked.coords().size() + ref_k.coords().size() +
                    ball.size());
    samples.insert(samples.end(), tracked.coords().begin(),
                   tracked.coords().end());
    samples.insert(samples.end(), ref_k.coords().begin(),
                   ref_k.coords().end());
    samples.insert(samples.end(), ball.begin(), ball.end());
    const std::size_t nS = samples.size() / dd;

    // Member values frozen at the reference cloud, and the target values.
    std::vector<std::vector<double>> V(fam);
    for (std::size_t u = 0; u < fam; ++u) {
      VelocityField fu = dyn.field_of(tk, ref_k, u);
      V[u].resize(samples.size());
      parallel_for(nS, [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s)
          fu.eval(tk, {samples.data() + s * dd, dd},
                  {V[u].data() + s * dd, dd});
      });
    }
    std::vector<double> Wv(samples.size());
    parallel_for(nS, [&](std::size_t b, std::size_t e) {
      for (std::size_t s = b; s < e; ++s)
        w.eval(tk, {samples.data() + s * dd, dd}, {Wv.data() + s * dd, dd});
    });

    double best_eta = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    std::vector<double> blend(dd);
    for (std::size_t m = 0; m < grid.size(); ++m) {
      const std::vector<double>& cw = grid[m].weights;
      double eta = 0.0;
      for (std::size_t s = 0; s < nS && eta < best_eta; ++s) {
        std::fill(blend.begin(), blend.end(), 0.0);
        for (std::size_t u = 0; u < fam; ++u) {
          if (cw[u] == 0.0) continue;
          const double* vu = V[u].data() + s * dd;
          for (std::size_t c = 0; c < dd; ++c) blend[c] += cw[u] * vu[c];
        }
        double gap_sq = 0.0;
        for (std::size_t c = 0; c < dd; ++c) {
          double diff = blend[c] - Wv[s * dd + c];
          gap_sq += diff * diff;
        }
        eta = std::max(eta, std::sqrt(gap_sq));
      }
      if (eta < best_eta) {
        best_eta = eta;
        best_idx = m;
      }
    }

    const ControlMix& chosen = grid[best_idx];
    result.mismatch[k] = best_eta;
    result.controls.push_back(chosen);
    integral += best_eta * (tk1 - tk);

    CloudField f = coupled_field(dyn, chosen, weights);
    rk4_cloud_advance(f, tk, tk1, dt, pos);

    times.push_back(tk1);
    states.emplace_back(d, pos, weights);
    meta.step_provenance.push_back(chosen.describe(names));

    result.realized[k + 1] =
        wasserstein2(states.back(), reference.state(k + 1)).distance;
    result.bound[k + 1] = (1.0 + opts.slack) *
                          std::exp(rate * (tk1 - t0)) *
                          (result.realized[0] + integral);
  }

  result.trajectory = MeasureTrajectory(std::move(times), std::move(states),
                                        std::move(meta));
  return result;
}

ReachableSample reachable_sample(const SetValuedDynamics& dyn,
                                 const EmpiricalMeasure& mu0, double t,
                                 std::size_t n, double dt, std::uint64_t seed,
                                 int depth) {
  if (!(t > 0.0)) throw ValidationError("reachable horizon must be positive");
  if (n == 0) throw ValidationError("reachable sample needs n >= 1");

  ReachableSample out;
  out.time = t;
  out.ball_radius = ci_ball_radius(support_radius(mu0), dyn.sublinearity(), t);
  out.measures.reserve(n);
  out.selections.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, i);
    Selection sel =
        Selection::random_dyadic(0.0, t, depth, dyn.family_size(), rng);
    MeasureTrajectory traj = solve_selection(dyn, sel, mu0, dt);
    const EmpiricalMeasure& end = traj.states().back();
    if (support_radius(end) > out.ball_radius * (1.0 + 1e-9) + 1e-9)
      throw NumericalError(
          "reachable endpoint escaped the certified support ball");
    out.measures.push_back(end);
    out.selections.push_back(std::move(sel));
  }
  return out;
}

InitialVelocityResult initial_velocity_solution(const SetValuedDynamics& dyn,
                                                double tau,
                                                const EmpiricalMeasure& mu_tau,
                                                std::size_t u_tau, double dt,
                                                double h0, int ladder) {
  if (u_tau >= dyn.family_size())
    throw ValidationError("member index out of range");
  if (!(h0 > 0.0)) throw ValidationError("probe width must be positive");
  if (ladder < 2 || ladder > 40)
    throw ValidationError("probe ladder length out of range");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");

  std::vector<double> hs(static_cast<std::size_t>(ladder));
  for (int k = 0; k < ladder; ++k) hs[static_cast<std::size_t>(k)] = std::ldexp(h0, -k);

  std::vector<double> grid{tau};
  for (int j = 1; j <= 16; ++j)
    grid.push_back(j == 16 ? tau + h0 : tau + h0 * (j / 16.0));
  for (double h : hs) grid.push_back(tau + h);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  Selection sel;
  sel.grid = grid;
  sel.controls.assign(grid.size() - 1,
                      ControlMix::pure(u_tau, dyn.family_size()));

  InitialVelocityResult out;
  out.trajectory = solve_selection(dyn, sel, mu_tau, dt);

  VelocityField v_tau = dyn.field_of(tau, mu_tau, u_tau);
  TangentVector xi = TangentVector::from_function(
      mu_tau, [&](std::span<const double> x, std::span<double> o) {
        v_tau.eval(tau, x, o);
      });

  out.probe_h = hs;
  out.probe_ratio.resize(hs.size());
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const double h = hs[k];
    const EmpiricalMeasure& at_h =
        out.trajectory.state(out.trajectory.index_of_time(tau + h));
    EmpiricalMeasure pushed = perturb(mu_tau, xi, h);
    out.probe_ratio[k] = wasserstein2(at_h, pushed).distance / h;
  }
  out.certificate_ok =
      out.probe_ratio.back() <=
      std::max(1e-9, 0.35 * out.probe_ratio.front());
  return out;
}

VelocityField field_along_trajectory(const SetValuedDynamics& dyn,
                                     std::size_t u,
                                     const MeasureTrajectory& traj) {
  if (u >= dyn.family_size())
    throw ValidationError("member index out of range");
  if (traj.nodes() == 0)
    throw ValidationError("trajectory view needs a nonempty trajectory");
  if (traj.state(0).dim() != dyn.dim())
    throw DimensionError("trajectory does not match the dynamics");

  double m2_max = 0.0;
  for (const auto& st : traj.states()) m2_max = std::max(m2_max, moment2(st));

  struct Cache {
    std::mutex lock;
    std::map<std::size_t, VelocityField> frozen;
  };
  auto cache = std::make_shared<Cache>();
  const SetValuedDynamics* dyn_ptr = &dyn;
  const MeasureTrajectory* traj_ptr = &traj;

  auto eval = [cache, dyn_ptr, traj_ptr, u](double t, std::span<const double> x,
                                            std::span<double> out) {
    const std::vector<double>& ts = traj_ptr->times();
    auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t idx;
    if (it == ts.begin())
      idx = 0;
    else if (it == ts.end())
      idx = ts.size() - 1;
    else {
      std::size_t hi = static_cast<std::size_t>(it - ts.begin());
      idx = (t - ts[hi - 1] <= ts[hi] - t) ? hi - 1 : hi;
    }
    const VelocityField* f = nullptr;
    {
      std::lock_guard<std::mutex> guard(cache->lock);
      auto found = cache->frozen.find(idx);
      if (found == cache->frozen.end())
        found = cache->frozen
                    .emplace(idx, dyn_ptr->field_of(traj_ptr->time(idx),
                                                    traj_ptr->state(idx), u))
                    .first;
      f = &found->second;
    }
    f->eval(t, x, out);
  };
  return VelocityField(dyn.dim(), std::move(eval),
                       dyn.sublinearity() * (1.0 + m2_max), dyn.lipschitz_x(),
                       "member:" + dyn.member(u).name + "@trajectory");
}

}  // namespace wviab
