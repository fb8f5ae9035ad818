#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "wviab/errors.hpp"
#include "wviab/measures.hpp"
#include "wviab/rng.hpp"

using namespace wviab;

TEST_CASE("measure construction validates its invariants") {
  CHECK_THROWS_AS(EmpiricalMeasure(2, {1.0, 2.0, 3.0}, {1.0}),
                  ValidationError);  // ragged coordinates
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {0.7, 0.7}),
                  ValidationError);  // weights exceed one
  CHECK_THROWS_AS(EmpiricalMeasure(1, {0.0, 1.0}, {1.3, -0.3}),
                  ValidationError);  // negative weight
  CHECK_THROWS_AS(EmpiricalMeasure(1, {std::nan("")}, {1.0}),
                  ValidationError);  // non-finite coordinate
  CHECK_THROWS_AS(EmpiricalMeasure(0, {}, {}), ValidationError);

  const EmpiricalMeasure mu(1, {0.0, 1.0, 2.0}, {0.5, 0.0, 0.5});
  CHECK(mu.size() == 2);  // zero-weight atom dropped
  CHECK(mu.point(1)[0] == 2.0);

  const EmpiricalMeasure u = EmpiricalMeasure::uniform(2, {1.0, 2.0, 3.0, 4.0});
  CHECK(u.size() == 2);
  CHECK(u.weight(0) == 0.5);

  const EmpiricalMeasure d = EmpiricalMeasure::dirac({3.0, 4.0});
  CHECK(d.size() == 1);
  CHECK(d.weight(0) == 1.0);
}

TEST_CASE("distance between diracs is the point distance") {
  const EmpiricalMeasure a = EmpiricalMeasure::dirac({0.0, 0.0});
  const EmpiricalMeasure b = EmpiricalMeasure::dirac({3.0, 4.0});
  CHECK(wasserstein2(a, b).distance == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(wasserstein2(a, a).distance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-atom half weights against a dirac") {
  const EmpiricalMeasure mu =
      EmpiricalMeasure::from_points(1, {{0.0}, {2.0}}, {0.5, 0.5});
  const EmpiricalMeasure nu = EmpiricalMeasure::dirac({1.0});
  // both atoms ship mass 1/2 across distance 1
  CHECK(wasserstein2(mu, nu).distance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform equal clouds match the permutation minimum") {
  Rng rng = Rng::stream(17, 0);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const int d = 1 + static_cast<int>(rng.index(3));
    const std::size_t n = 1 + rng.index(6);
    const EmpiricalMeasure mu = oracle::random_cloud(rng, d, n, 2.0, true);
    const EmpiricalMeasure nu = oracle::random_cloud(rng, d, n, 2.0, true);
    worst = std::max(worst, std::abs(wasserstein2(mu, nu).distance -
                                     oracle::permutation_w2(mu, nu)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("weighted two-by-two cases match the endpoint enumeration") {
  Rng rng = Rng::stream(18, 0);
  for (int c = 0; c < 40; ++c) {
    const double w0 = rng.uniform(0.1, 0.9);
    const double v0 = rng.uniform(0.1, 0.9);
    std::vector<double> xs = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<double> ys = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const EmpiricalMeasure mu =
        EmpiricalMeasure::from_points(1, {{xs[0]}, {xs[1]}}, {w0, 1 - w0});
    const EmpiricalMeasure nu =
        EmpiricalMeasure::from_points(1, {{ys[0]}, {ys[1]}}, {v0, 1 - v0});
    const std::vector<double> cost = {
        (xs[0] - ys[0]) * (xs[0] - ys[0]), (xs[0] - ys[1]) * (xs[0] - ys[1]),
        (xs[1] - ys[0]) * (xs[1] - ys[0]), (xs[1] - ys[1]) * (xs[1] - ys[1])};
    const double want =
        oracle::two_by_two_w2({w0, 1 - w0}, {v0, 1 - v0}, cost);
    CHECK(wasserstein2(mu, nu).distance == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("optimal plans have exact marginals and matching cost") {
  Rng rng = Rng::stream(19, 0);
  const EmpiricalMeasure mu = oracle::random_cloud(rng, 2, 5, 1.5, false);
  const EmpiricalMeasure nu = oracle::random_cloud(rng, 2, 7, 1.5, false);
  const W2Result res = wasserstein2(mu, nu);
  CHECK(res.plan.optimal);
  CHECK_NOTHROW(res.plan.validate(mu, nu));
  CHECK(res.distance * res.distance == doctest::Approx(res.plan.cost));
}

TEST_CASE("distance is translation invariant") {
  Rng rng = Rng::stream(20, 0);
  const EmpiricalMeasure mu = oracle::random_cloud(rng, 2, 4, 1.0, true);
  const EmpiricalMeasure nu = oracle::random_cloud(rng, 2, 6, 1.0, false);
  const double base = wasserstein2(mu, nu).distance;
  auto shift = [](const EmpiricalMeasure& m) {
    return pushforward(m, m.dim(),
                       [](std::span<const double> x, std::span<double> out) {
                         out[0] = x[0] + 3.5;
                         out[1] = x[1] - 1.25;
                       });
  };
  CHECK(wasserstein2(shift(mu), shift(nu)).distance ==
        doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("pushforward merges coincident images") {
  const EmpiricalMeasure mu =
      EmpiricalMeasure::from_points(1, {{-1.0}, {0.5}, {2.0}});
  const EmpiricalMeasure collapsed =
      pushforward(mu, 1, [](std::span<const double>, std::span<double> out) {
        out[0] = 7.0;
      });
  CHECK(collapsed.size() == 1);
  CHECK(collapsed.weight(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(collapsed.point(0)[0] == 7.0);
}

TEST_CASE("summary statistics agree with direct sums") {
  const EmpiricalMeasure mu =
      EmpiricalMeasure::from_points(2, {{1.0, 0.0}, {0.0, 2.0}}, {0.25, 0.75});
  CHECK(moment2(mu) == doctest::Approx(std::sqrt(0.25 * 1.0 + 0.75 * 4.0)));
  CHECK(support_radius(mu) == doctest::Approx(2.0));
  const std::vector<double> m = mean(mu);
  CHECK(m[0] == doctest::Approx(0.25));
  CHECK(m[1] == doctest::Approx(1.5));
  const double var = variance(mu);
  const double direct = 0.25 * (0.75 * 0.75 + 1.5 * 1.5) +
                        0.75 * (0.25 * 0.25 + 0.5 * 0.5);
  CHECK(var == doctest::Approx(direct));
}

TEST_CASE("tangent vectors stay tied to their base") {
  const EmpiricalMeasure mu = EmpiricalMeasure::from_points(1, {{0.0}, {1.0}});
  const EmpiricalMeasure nu = EmpiricalMeasure::from_points(1, {{0.0}, {2.0}});
  const TangentVector xi = TangentVector::from_function(
      mu, [](std::span<const double> x, std::span<double> out) {
        out[0] = -x[0];
      });
  CHECK(xi.l2_norm_sq(mu) == doctest::Approx(0.5));
  CHECK_THROWS_AS(xi.l2_norm_sq(nu), BaseMismatchError);
  CHECK_THROWS_AS(superdifferential_gap(nu, mu, xi, 0.5), BaseMismatchError);

  const double c = 2.5;
  const TangentVector k =
      TangentVector::constant(mu, std::span<const double>(&c, 1));
  CHECK(k.value(1)[0] == 2.5);
}

TEST_CASE("perturb displaces atoms linearly") {
  const EmpiricalMeasure mu = EmpiricalMeasure::from_points(1, {{0.0}, {1.0}});
  const TangentVector xi(mu, {1.0, -2.0});
  const EmpiricalMeasure moved = perturb(mu, xi, 0.25);
  CHECK(moved.point(0)[0] == doctest::Approx(0.25));
  CHECK(moved.point(1)[0] == doctest::Approx(0.5));
  CHECK(moved.weight(0) == mu.weight(0));
}

TEST_CASE("squared-distance expansion stays one-sided") {
  Rng rng = Rng::stream(21, 0);
  double worst = -1.0;
  for (int c = 0; c < 100; ++c) {
    const int d = 1 + static_cast<int>(rng.index(2));
    const EmpiricalMeasure mu =
        oracle::random_cloud(rng, d, 1 + rng.index(6), 2.0, c % 2 == 0);
    const EmpiricalMeasure nu =
        oracle::random_cloud(rng, d, 1 + rng.index(6), 2.0, c % 3 != 0);
    std::vector<double> vals(mu.size() * static_cast<std::size_t>(d));
    for (double& v : vals) v = rng.normal();
    const TangentVector xi(mu, std::move(vals));
    const double h = std::ldexp(1.0, -static_cast<int>(rng.index(8)));
    worst = std::max(worst, superdifferential_gap(mu, nu, xi, h));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("content hash is order and value sensitive") {
  const EmpiricalMeasure a = EmpiricalMeasure::from_points(1, {{0.0}, {1.0}});
  const EmpiricalMeasure b = EmpiricalMeasure::from_points(1, {{1.0}, {0.0}});
  const EmpiricalMeasure c = EmpiricalMeasure::from_points(1, {{0.0}, {1.0}});
  CHECK(a.content_hash() == c.content_hash());
  CHECK(a.content_hash() != b.content_hash());
}
