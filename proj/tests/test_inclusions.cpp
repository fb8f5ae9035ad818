#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wviab/errors.hpp"
#include "wviab/inclusions.hpp"
#include "wviab/measures.hpp"
#include "wviab/registry.hpp"
#include "wviab/rng.hpp"

using namespace wviab;

namespace {

FieldSpec attraction_spec(double lambda, std::vector<double> target) {
  FieldSpec s;
  s.kind = "attraction";
  s.lambda = lambda;
  s.target = std::move(target);
  return s;
}

FieldSpec constant_spec(std::vector<double> b, std::string name = "") {
  FieldSpec s;
  s.kind = "constant";
  s.b = std::move(b);
  s.name = std::move(name);
  return s;
}

}  // namespace

TEST_CASE("control mixes and the simplex grid") {
  const ControlMix p = ControlMix::pure(1, 3);
  REQUIRE(p.weights.size() == 3);
  CHECK(p.weights[1] == 1.0);
  CHECK(p.is_pure());
  CHECK(p.top_index() == 1);

  const std::vector<ControlMix> pairs = simplex_grid(2, 8);
  CHECK(pairs.size() == 9);  // multiples of 1/8 summing to one
  CHECK(pairs.front().is_pure());
  CHECK(pairs.front().top_index() == 0);
  for (const ControlMix& m : pairs) {
    double sum = 0.0;
    for (double w : m.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK(simplex_grid(3, 4).size() == 15);  // C(6, 2) compositions
}

TEST_CASE("selection validation catches malformed schedules") {
  Selection good;
  good.grid = {0.0, 0.5, 1.0};
  good.controls = {ControlMix::pure(0, 2), ControlMix::pure(1, 2)};
  CHECK_NOTHROW(good.validate(2));

  Selection short_grid;
  short_grid.grid = {0.0};
  CHECK_THROWS_AS(short_grid.validate(2), ValidationError);

  Selection unsorted;
  unsorted.grid = {0.0, 1.0, 0.5};
  unsorted.controls = {ControlMix::pure(0, 2), ControlMix::pure(0, 2)};
  CHECK_THROWS_AS(unsorted.validate(2), ValidationError);

  Selection missing;
  missing.grid = {0.0, 0.5, 1.0};
  missing.controls = {ControlMix::pure(0, 2)};
  CHECK_THROWS_AS(missing.validate(2), ControlGridMismatch);

  Selection wrong_family;
  wrong_family.grid = {0.0, 1.0};
  wrong_family.controls = {ControlMix::pure(0, 3)};
  CHECK_THROWS_AS(wrong_family.validate(2), ControlGridMismatch);
}

TEST_CASE("random dyadic selections live on the exact dyadic grid") {
  Rng rng = Rng::stream(41, 0);
  const Selection sel = Selection::random_dyadic(0.0, 1.0, 3, 2, rng);
  REQUIRE(sel.grid.size() == 9);
  CHECK(sel.grid.front() == 0.0);
  CHECK(sel.grid.back() == 1.0);
  CHECK(sel.grid[4] == 0.5);
  CHECK(sel.controls.size() == 8);
  for (const ControlMix& m : sel.controls) CHECK(m.is_pure());
  CHECK_NOTHROW(sel.validate(2));
}

TEST_CASE("singleton families reduce to the plain continuity solver") {
  const FieldSpec spec = attraction_spec(1.0, {0.2, -0.1});
  const SetValuedDynamics dyn = build_dynamics({spec}, 2);
  Rng rng = Rng::stream(42, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 6, 1.0, true);

  const Selection sel = Selection::constant(0.0, 1.0, ControlMix::pure(0, 1));
  const MeasureTrajectory via_selection = solve_selection(dyn, sel, mu0, 0.01);
  const MeasureTrajectory via_field = solve_continuity(
      build_plain_field(spec, 2), 0.0, 1.0, mu0, 0.01);
  CHECK(wasserstein2(via_selection.states().back(),
                     via_field.states().back()).distance <= 1e-12);
}

TEST_CASE("piecewise constant drift selections integrate exactly") {
  // family {+1, -1} in one dimension: the endpoint is the signed sum of
  // interval lengths, and RK4 reproduces constants without error.
  const std::vector<FieldSpec> family = {constant_spec({1.0}, "right"),
                                         constant_spec({-1.0}, "left")};
  const SetValuedDynamics dyn = build_dynamics(family, 1);
  const EmpiricalMeasure mu0 = EmpiricalMeasure::dirac({0.0});

  for (int trial = 0; trial < 10; ++trial) {
    Rng rng = Rng::stream(43, static_cast<std::uint64_t>(trial));
    const Selection sel = Selection::random_dyadic(0.0, 1.0, 4, 2, rng);
    double want = 0.0;
    for (std::size_t i = 0; i + 1 < sel.grid.size(); ++i) {
      const double len = sel.grid[i + 1] - sel.grid[i];
      want += (sel.controls[i].top_index() == 0 ? 1.0 : -1.0) * len;
    }
    const MeasureTrajectory traj = solve_selection(dyn, sel, mu0, 0.01);
    CHECK(traj.states().back().point(0)[0] ==
          doctest::Approx(want).epsilon(1e-12));
  }

  // a constant +1 drift carries the origin Dirac to the Dirac at one
  const Selection pure = Selection::constant(0.0, 1.0, ControlMix::pure(0, 2));
  const MeasureTrajectory drift = solve_selection(dyn, pure, mu0, 0.01);
  CHECK(wasserstein2(drift.states().back(),
                     EmpiricalMeasure::dirac({1.0})).distance <= 1e-12);
}

TEST_CASE("blended controls equal the averaged field") {
  const std::vector<FieldSpec> family = {constant_spec({0.3, -0.2}, "a"),
                                         constant_spec({-0.1, 0.4}, "b")};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  Rng rng = Rng::stream(44, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 4, 1.0, true);

  Selection half;
  half.grid = {0.0, 1.0};
  half.controls = {ControlMix{{0.5, 0.5}}};
  const MeasureTrajectory mixed = solve_selection(dyn, half, mu0, 0.01);

  const VelocityField averaged(
      2,
      [](double, std::span<const double>, std::span<double> out) {
        out[0] = 0.1;
        out[1] = 0.1;
      },
      0.5, 0.0);
  const MeasureTrajectory direct =
      solve_continuity(averaged, 0.0, 1.0, mu0, 0.01);
  CHECK(wasserstein2(mixed.states().back(), direct.states().back()).distance <=
        1e-12);

  // pointwise check of the blend itself
  const VelocityField blend = dyn.field_of(0.0, mu0, ControlMix{{0.25, 0.75}});
  std::vector<double> out(2);
  blend.eval(0.0, mu0.point(0), out);
  CHECK(out[0] == doctest::Approx(0.25 * 0.3 + 0.75 * -0.1).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(0.25 * -0.2 + 0.75 * 0.4).epsilon(1e-14));
}

TEST_CASE("dynamics audit accepts honest constants and rejects lies") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.0, 0.0}),
                                         constant_spec({0.5, 0.0})};
  CHECK_NOTHROW(audit_dynamics(build_dynamics(family, 2)));

  // growth lie: the member moves ten times faster than declared
  SetValuedDynamics::Member fast;
  fast.name = "fast";
  fast.freeze = [](double, const EmpiricalMeasure&) {
    return VelocityField(
        1,
        [](double, std::span<const double> x, std::span<double> out) {
          out[0] = 10.0 * x[0];
        },
        10.0, 10.0);
  };
  const SetValuedDynamics lying(1, {fast}, 0.1, 10.0, 0.0);
  CHECK_THROWS_AS(audit_dynamics(lying), ValidationError);

  // measure-coupling lie: field equals the cloud mean but L claims zero
  SetValuedDynamics::Member follows_mean;
  follows_mean.name = "follows_mean";
  follows_mean.freeze = [](double, const EmpiricalMeasure& mu) {
    const std::vector<double> m = mean(mu);
    return VelocityField(
        1,
        [m](double, std::span<const double>, std::span<double> out) {
          out[0] = m[0];
        },
        1.0, 0.0);
  };
  const SetValuedDynamics uncoupled(1, {follows_mean}, 1.0, 0.0, 0.0);
  CHECK_THROWS_AS(audit_dynamics(uncoupled), ValidationError);
  const SetValuedDynamics coupled(1, {follows_mean}, 1.0, 0.0, 1.5);
  CHECK_NOTHROW(audit_dynamics(coupled));
}

TEST_CASE("coupled ball certificate dominates the single-field one") {
  for (const double r : {0.5, 1.0, 2.0}) {
    for (const double M : {0.5, 1.0}) {
      for (const double h : {0.5, 1.0}) {
        CHECK(ci_ball_radius(r, M, h) >= apriori_constants(r, M, h).radius);
      }
    }
  }
  CHECK_THROWS_AS(ci_ball_radius(-1.0, 1.0, 1.0), ValidationError);
}

TEST_CASE("selection solutions respect the coupled support certificate") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.3, 0.0}),
                                         constant_spec({-0.2, 0.1})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  Rng rng = Rng::stream(45, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 5, 0.8, true);
  const double ball =
      ci_ball_radius(support_radius(mu0), dyn.sublinearity(), 1.0);
  const Selection sel = Selection::random_dyadic(0.0, 1.0, 4, 2, rng);
  const MeasureTrajectory traj = solve_selection(dyn, sel, mu0, 0.01);
  for (const EmpiricalMeasure& st : traj.states()) {
    CHECK(support_radius(st) <= ball + 1e-6);
  }
}

TEST_CASE("tracking a reachable reference keeps the error at roundoff") {
  const std::vector<FieldSpec> family = {attraction_spec(0.5, {0.0}),
                                         constant_spec({0.4})};
  const SetValuedDynamics dyn = build_dynamics(family, 1);
  const VelocityField w = build_plain_field(family[0], 1);
  const EmpiricalMeasure mu0 =
      EmpiricalMeasure::from_points(1, {{-0.5}, {0.2}, {0.9}});

  std::vector<double> grid(9);
  for (int i = 0; i < 9; ++i) grid[i] = 0.5 * (i / 8.0);
  const MeasureTrajectory ref = solve_continuity_on_grid(w, grid, mu0, 0.01);

  const TrackingResult matched = filippov_track(dyn, ref, w, mu0, 0.01);
  REQUIRE(matched.realized.size() == grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(matched.realized[k] <= 1e-8);  // w is in the family, start matches
    CHECK(matched.realized[k] <= matched.bound[k] + 1e-6);
  }

  // shifted start: the error stays under the certified envelope
  const EmpiricalMeasure shifted =
      pushforward(mu0, 1, [](std::span<const double> x, std::span<double> o) {
        o[0] = x[0] + 0.3;
      });
  const TrackingResult off = filippov_track(dyn, ref, w, shifted, 0.01);
  CHECK(off.realized.front() == doctest::Approx(0.3).epsilon(1e-9));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(off.realized[k] <= off.bound[k] + 1e-6);
  }
}

TEST_CASE("tracking a field outside the family still meets its bound") {
  const std::vector<FieldSpec> family = {constant_spec({0.4}, "push"),
                                         attraction_spec(0.8, {0.0})};
  const SetValuedDynamics dyn = build_dynamics(family, 1);
  // the target drift sits strictly between the two members
  const VelocityField w(
      1,
      [](double, std::span<const double> x, std::span<double> out) {
        out[0] = 0.2 - 0.4 * x[0];
      },
      0.6, 0.4);
  const EmpiricalMeasure mu0 = EmpiricalMeasure::from_points(1, {{0.1}, {0.6}});
  std::vector<double> grid(9);
  for (int i = 0; i < 9; ++i) grid[i] = 0.5 * (i / 8.0);
  const MeasureTrajectory ref = solve_continuity_on_grid(w, grid, mu0, 0.01);
  const TrackingResult res = filippov_track(dyn, ref, w, mu0, 0.01);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    CHECK(res.realized[k] <= res.bound[k] + 1e-6);
  }
}

TEST_CASE("reachable samples are deterministic and stay in the ball") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.3, 0.0}),
                                         constant_spec({-0.2, 0.1})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  Rng rng = Rng::stream(46, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 4, 0.7, true);

  const ReachableSample a = reachable_sample(dyn, mu0, 0.5, 6, 0.01, 9, 3);
  const ReachableSample b = reachable_sample(dyn, mu0, 0.5, 6, 0.01, 9, 3);
  REQUIRE(a.measures.size() == 6);
  REQUIRE(a.selections.size() == 6);
  CHECK(a.time == 0.5);
  for (std::size_t i = 0; i < a.measures.size(); ++i) {
    CHECK(a.measures[i].content_hash() == b.measures[i].content_hash());
    CHECK(support_radius(a.measures[i]) <= a.ball_radius + 1e-6);
  }

  const ReachableSample c = reachable_sample(dyn, mu0, 0.5, 6, 0.01, 10, 3);
  bool any_different = false;
  for (std::size_t i = 0; i < c.measures.size(); ++i) {
    any_different |= c.measures[i].content_hash() != a.measures[i].content_hash();
  }
  CHECK(any_different);
}

TEST_CASE("prescribed initial velocities certify by a shrinking ratio ladder") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.2, -0.1}),
                                         constant_spec({0.3, 0.0})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  Rng rng = Rng::stream(47, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 5, 0.8, true);

  for (std::size_t u = 0; u < dyn.family_size(); ++u) {
    const InitialVelocityResult res =
        initial_velocity_solution(dyn, 0.0, mu0, u, 0.01, 0.5, 8);
    REQUIRE(res.probe_ratio.size() == res.probe_h.size());
    REQUIRE(res.probe_ratio.size() >= 2);
    CHECK(res.certificate_ok);
    for (std::size_t k = 0; k + 1 < res.probe_ratio.size(); ++k) {
      CHECK(res.probe_ratio[k + 1] <= 1.05 * res.probe_ratio[k] + 1e-12);
    }
    CHECK(res.probe_ratio.back() <=
          0.1 * res.probe_ratio.front() + 1e-12);
  }

  CHECK_THROWS_AS(initial_velocity_solution(dyn, 0.0, mu0, 7, 0.01),
                  ValidationError);
}

TEST_CASE("trajectory views freeze coupled members against recorded states") {
  FieldSpec spring;
  spring.kind = "interaction";
  spring.kernel = "spring";
  spring.kappa = 0.8;
  const SetValuedDynamics dyn = build_dynamics({spring}, 2);
  Rng rng = Rng::stream(48, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 6, 1.0, true);
  const Selection sel = Selection::constant(0.0, 0.5, ControlMix::pure(0, 1));
  const MeasureTrajectory traj = solve_selection(dyn, sel, mu0, 0.01);

  const VelocityField view = field_along_trajectory(dyn, 0, traj);
  // at the initial time the view equals the member frozen at mu0
  const VelocityField frozen = dyn.field_of(0.0, mu0, 0);
  std::vector<double> a(2), b(2);
  view.eval(0.0, mu0.point(0), a);
  frozen.eval(0.0, mu0.point(0), b);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-14));
}
