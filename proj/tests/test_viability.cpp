#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wviab/errors.hpp"
#include "wviab/measures.hpp"
#include "wviab/registry.hpp"
#include "wviab/rng.hpp"
#include "wviab/viability.hpp"

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

TEST_CASE("second-moment ball distance and projection close exactly") {
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  const EmpiricalMeasure inside =
      EmpiricalMeasure::from_points(1, {{0.5}, {-0.5}});
  CHECK(ball.distance(inside) == 0.0);
  CHECK(ball.contains(inside));

  const EmpiricalMeasure outside = EmpiricalMeasure::dirac({2.0});
  CHECK(ball.distance(outside) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(ball.contains(outside));

  const EmpiricalMeasure proj = ball.project(outside);
  CHECK(moment2(proj) == doctest::Approx(1.0).epsilon(1e-12));
  // the projection attains the reported distance
  CHECK(wasserstein2(outside, proj).distance ==
        doctest::Approx(ball.distance(outside)).epsilon(1e-8));
}

TEST_CASE("variance ball ignores translations") {
  const ConstraintSet ball = ConstraintSet::variance_ball(0.25);
  const EmpiricalMeasure spread =
      EmpiricalMeasure::from_points(1, {{-1.0}, {1.0}});  // variance 1
  CHECK(ball.distance(spread) == doctest::Approx(0.5).epsilon(1e-12));
  const EmpiricalMeasure proj = ball.project(spread);
  CHECK(variance(proj) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(mean(proj)[0] == doctest::Approx(0.0).epsilon(1e-12));

  const EmpiricalMeasure shifted =
      EmpiricalMeasure::from_points(1, {{9.0}, {11.0}});
  CHECK(ball.distance(shifted) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mean constraints act by translation") {
  const ConstraintSet near_origin = ConstraintSet::mean_norm_ball(1.0);
  const EmpiricalMeasure far =
      EmpiricalMeasure::from_points(2, {{3.0, 0.0}, {3.0, 2.0}});  // mean (3,1)
  const double mean_norm = std::sqrt(10.0);
  CHECK(near_origin.distance(far) ==
        doctest::Approx(mean_norm - 1.0).epsilon(1e-12));
  const EmpiricalMeasure proj = near_origin.project(far);
  const std::vector<double> pm = mean(proj);
  CHECK(std::sqrt(pm[0] * pm[0] + pm[1] * pm[1]) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(wasserstein2(far, proj).distance ==
        doctest::Approx(near_origin.distance(far)).epsilon(1e-8));

  const ConstraintSet slice = ConstraintSet::mean_slice({1.0, -1.0});
  CHECK(slice.distance(far) ==
        doctest::Approx(std::sqrt(4.0 + 4.0)).epsilon(1e-12));
  const EmpiricalMeasure snapped = slice.project(far);
  CHECK(mean(snapped)[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean(snapped)[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("constraint distances are 1-Lipschitz along perturbations") {
  Rng rng = Rng::stream(51, 0);
  const ConstraintSet sets[] = {
      ConstraintSet::second_moment_ball(0.8), ConstraintSet::variance_ball(0.3),
      ConstraintSet::mean_norm_ball(0.5), ConstraintSet::mean_slice({0.2, 0.0})};
  for (int c = 0; c < 40; ++c) {
    const EmpiricalMeasure mu = oracle::random_cloud(rng, 2, 5, 1.5, false);
    std::vector<double> vals(mu.size() * 2);
    for (double& v : vals) v = rng.normal();
    const TangentVector xi(mu, std::move(vals));
    const double h = rng.uniform(0.01, 0.3);
    const EmpiricalMeasure nu = perturb(mu, xi, h);
    const double step = wasserstein2(mu, nu).distance;
    for (const ConstraintSet& set : sets) {
      CHECK(std::abs(set.distance(mu) - set.distance(nu)) <= step + 1e-9);
    }
  }
}

TEST_CASE("contingent directions exist where the dynamics can stay put") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.0, 0.0}),
                                         constant_spec({0.5, 0.0})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  Rng rng = Rng::stream(52, 0);
  const EmpiricalMeasure mu = oracle::random_cloud(rng, 2, 6, 0.5, true);

  const ContingentReport rep = contingent_test(dyn, ball, 0.0, mu);
  REQUIRE_FALSE(rep.probe_h.empty());
  CHECK(rep.ok);
  CHECK(rep.best_ratio.back() <= 0.1 * rep.best_ratio.front() + 1e-9);

  // a pure outward push admits no admissible direction on the boundary
  const SetValuedDynamics push = build_dynamics({constant_spec({1.0})}, 1);
  const ContingentReport stuck = contingent_test(
      push, ConstraintSet::second_moment_ball(1.0),
      0.0, EmpiricalMeasure::dirac({1.0}));
  CHECK_FALSE(stuck.ok);
}

TEST_CASE("feasible synthesis stays inside the ball") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.0, 0.0}),
                                         constant_spec({0.5, 0.0})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  Rng rng = Rng::stream(53, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 8, 0.5, true);

  ViabilityOptions opts;
  opts.depth = 5;
  const ViabilityReport rep = viable_trajectory(dyn, ball, mu0, 1.0, 0.01, opts);
  CHECK(rep.viable);
  CHECK(rep.worst <= rep.tolerance);
  REQUIRE(rep.constraint_distance.size() == rep.trajectory.nodes());
  for (const double d : rep.constraint_distance) CHECK(d <= rep.tolerance);
  CHECK_NOTHROW(rep.selection.validate(dyn.family_size()));
  // the reported trajectory replays the reported selection
  const MeasureTrajectory replay =
      solve_selection(dyn, rep.selection, mu0, 0.01);
  CHECK(wasserstein2(replay.states().back(),
                     rep.trajectory.states().back()).distance <= 1e-12);
}

TEST_CASE("forced escape is reported with its drift rate") {
  const SetValuedDynamics dyn = build_dynamics({constant_spec({1.0})}, 1);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  const EmpiricalMeasure mu0 = EmpiricalMeasure::dirac({1.0});

  ViabilityOptions opts;
  opts.depth = 5;
  const ViabilityReport rep = viable_trajectory(dyn, ball, mu0, 1.0, 0.01, opts);
  CHECK_FALSE(rep.viable);
  CHECK(rep.worst > rep.tolerance);

  // distance grows like t for the unit drift: check the least-squares slope
  double st = 0.0, sd = 0.0, stt = 0.0, std_ = 0.0;
  const std::size_t n = rep.trajectory.nodes();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = rep.trajectory.time(k);
    const double d = rep.constraint_distance[k];
    st += t;
    sd += d;
    stt += t * t;
    std_ += t * d;
  }
  const double slope =
      (static_cast<double>(n) * std_ - st * sd) /
      (static_cast<double>(n) * stt - st * st);
  CHECK(slope >= 0.8);
  CHECK(slope <= 1.2);
}

TEST_CASE("deeper synthesis never hurts on an escape problem") {
  const SetValuedDynamics dyn = build_dynamics(
      {constant_spec({0.6}, "right"), constant_spec({-0.6}, "left")}, 1);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(0.04);
  const EmpiricalMeasure mu0 = EmpiricalMeasure::dirac({0.1});

  auto worst_at = [&](int depth) {
    ViabilityOptions opts;
    opts.depth = depth;
    return viable_trajectory(dyn, ball, mu0, 1.0, 0.01, opts).worst;
  };
  const double coarse = worst_at(1);
  const double fine = worst_at(5);
  CHECK(fine <= coarse + 1e-9);
}

TEST_CASE("starting outside the constraint is rejected") {
  const SetValuedDynamics dyn = build_dynamics({constant_spec({0.0})}, 1);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  const EmpiricalMeasure far = EmpiricalMeasure::dirac({5.0});
  CHECK_THROWS_AS(viable_trajectory(dyn, ball, far, 1.0, 0.01),
                  NotInConstraint);
}

TEST_CASE("the decay monitor certifies non-escaping trajectories") {
  const std::vector<FieldSpec> family = {attraction_spec(1.0, {0.0, 0.0}),
                                         constant_spec({0.5, 0.0})};
  const SetValuedDynamics dyn = build_dynamics(family, 2);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  Rng rng = Rng::stream(54, 0);
  const EmpiricalMeasure mu0 = oracle::random_cloud(rng, 2, 6, 0.5, true);
  const ViabilityReport rep = viable_trajectory(dyn, ball, mu0, 1.0, 0.01);

  const double rate = dyn.lipschitz_x() + dyn.lipschitz_measure();
  const std::vector<double> margins =
      gronwall_monitor(rep.trajectory, ball, rate);
  REQUIRE(margins.size() == rep.trajectory.nodes());
  for (const double m : margins) CHECK(m <= 1e-6);
}
