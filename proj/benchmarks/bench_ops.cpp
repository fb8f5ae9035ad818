#include <benchmark/benchmark.h>

#include <vector>

#include "wviab/flows.hpp"
#include "wviab/inclusions.hpp"
#include "wviab/lyapunov.hpp"
#include "wviab/measures.hpp"
#include "wviab/registry.hpp"
#include "wviab/rng.hpp"
#include "wviab/viability.hpp"

using namespace wviab;

namespace {

EmpiricalMeasure cloud(std::uint64_t seed, int dim, std::size_t n,
                       bool uniform) {
  Rng rng = Rng::stream(seed, 0);
  std::vector<double> coords(n * static_cast<std::size_t>(dim));
  for (double& c : coords) c = rng.uniform(-1.0, 1.0);
  if (uniform) return EmpiricalMeasure(dim, std::move(coords),
                                       std::vector<double>(n, 1.0 / n));
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& x : w) {
    x = rng.uniform(0.2, 1.0);
    sum += x;
  }
  for (double& x : w) x /= sum;
  return EmpiricalMeasure(dim, std::move(coords), std::move(w));
}

SetValuedDynamics pair_dynamics(int dim) {
  FieldSpec pull;
  pull.kind = "attraction";
  pull.lambda = 1.0;
  pull.target = std::vector<double>(dim, 0.0);
  FieldSpec push;
  push.kind = "constant";
  push.b = std::vector<double>(dim, 0.0);
  push.b[0] = 0.5;
  return build_dynamics({pull, push}, dim);
}

void bm_assignment_w2(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const EmpiricalMeasure mu = cloud(1, 2, n, true);
  const EmpiricalMeasure nu = cloud(2, 2, n, true);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wasserstein2(mu, nu).distance);
  }
}
BENCHMARK(bm_assignment_w2)->Arg(8)->Arg(32)->Arg(128);

void bm_weighted_w2(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const EmpiricalMeasure mu = cloud(3, 2, n, false);
  const EmpiricalMeasure nu = cloud(4, 2, n + 3, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(wasserstein2(mu, nu).distance);
  }
}
BENCHMARK(bm_weighted_w2)->Arg(8)->Arg(32)->Arg(64);

void bm_rk4_flow(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const EmpiricalMeasure mu0 = cloud(5, 2, n, true);
  const VelocityField v(
      2,
      [](double, std::span<const double> x, std::span<double> out) {
        out[0] = -x[0] + 0.2;
        out[1] = -x[1];
      },
      1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        solve_continuity(v, 0.0, 1.0, mu0, 0.01).nodes());
  }
}
BENCHMARK(bm_rk4_flow)->Arg(16)->Arg(64)->Arg(256);

void bm_coupled_selection(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  FieldSpec spring;
  spring.kind = "interaction";
  spring.kernel = "spring";
  spring.kappa = 0.8;
  const SetValuedDynamics dyn = build_dynamics({spring}, 2);
  const EmpiricalMeasure mu0 = cloud(6, 2, n, true);
  const Selection sel = Selection::constant(0.0, 1.0, ControlMix::pure(0, 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_selection(dyn, sel, mu0, 0.01).nodes());
  }
}
BENCHMARK(bm_coupled_selection)->Arg(16)->Arg(64);

void bm_viable_synthesis(benchmark::State& state) {
  const SetValuedDynamics dyn = pair_dynamics(2);
  const ConstraintSet ball = ConstraintSet::second_moment_ball(1.0);
  const EmpiricalMeasure mu0 = cloud(7, 2, 8, true);
  ViabilityOptions opts;
  opts.depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        viable_trajectory(dyn, ball, mu0, 0.5, 0.01, opts).worst);
  }
}
BENCHMARK(bm_viable_synthesis)->Arg(2)->Arg(4);

void bm_decay_certificate(benchmark::State& state) {
  FieldSpec zero;
  zero.kind = "zero";
  FieldSpec pull;
  pull.kind = "attraction";
  pull.lambda = 1.0;
  pull.target = {0.0, 0.0};
  const SetValuedDynamics dyn = build_dynamics({zero, pull}, 2);
  const EmpiricalMeasure mu0 = cloud(8, 2, 6, true);
  const LyapunovFunctional V = LyapunovFunctional::second_moment_sq();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        stable_trajectory(dyn, V, 2.0, mu0, 0.5, 0.01).certified);
  }
}
BENCHMARK(bm_decay_certificate);

}  // namespace

BENCHMARK_MAIN();
