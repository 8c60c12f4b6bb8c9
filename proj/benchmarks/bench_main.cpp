#include "msbp/coupling.hpp"
#include "msbp/gw.hpp"
#include "msbp/random.hpp"
#include "msbp/sde.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace msbp;

namespace {

Model bench_model() {
  return {BranchingMechanism(0.5, 1.0, JumpMeasure::atoms({{1.0, 0.5}})),
          OffspringLaw({0.6, 0.0, 0.4}),
          RateFunction::ergodic_affine(1.0, {1.0}, RateFunction::MTail::Reciprocal)};
}

void BM_Philox(benchmark::State& state) {
  RandomStream rng(1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(rng());
}
BENCHMARK(BM_Philox);

void BM_Normal(benchmark::State& state) {
  RandomStream rng(1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
}
BENCHMARK(BM_Normal);

// One path of Z on [0, 1].
void BM_SimulateZ(benchmark::State& state) {
  const Model m = bench_model();
  SimScheme s;
  s.dt = 1.0 / static_cast<double>(state.range(0));
  s.T = 1.0;
  std::uint64_t rep = 0;
  for (auto _ : state) {
    RandomStream rng(7, stream_id(tags::kSimulate, rep++));
    benchmark::DoNotOptimize(simulate_Z(m, {1.0, 5}, s, rng));
  }
}
BENCHMARK(BM_SimulateZ)->Arg(100)->Arg(1000);

void BM_GWStep(benchmark::State& state) {
  const Model m = bench_model();
  const std::int64_t k = state.range(0);
  const double gamma = static_cast<double>(k);
  const GWSystem sys(k, gamma, feller_offspring(m.mech, k, gamma),
                     example_family(m.law, m.rate, gamma));
  RandomStream rng(3, 1);
  GWState z{k, 5};
  for (auto _ : state) {
    z = gw_step(sys, z, rng);
    if (z.x == 0 && z.y == 0) z = {k, 5};
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_GWStep)->Arg(200)->Arg(2000);

void BM_EmpiricalW1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RandomStream rng(5, 1);
  std::vector<State> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = {rng.exponential(1.0), static_cast<std::int64_t>(rng.uniform(0.0, 10.0))};
    b[i] = {rng.exponential(0.5), static_cast<std::int64_t>(rng.uniform(0.0, 10.0))};
  }
  for (auto _ : state) benchmark::DoNotOptimize(empirical_w1(a, b));
}
BENCHMARK(BM_EmpiricalW1)->Arg(64)->Arg(256)->Arg(512);

void BM_CouplingGenerator(benchmark::State& state) {
  const Model m = bench_model();
  const double theta = contraction_constants(m).theta;
  for (auto _ : state) {
    benchmark::DoNotOptimize(coupling_generator_F(m, {1.5, 4}, {0.5, 9}, theta));
  }
}
BENCHMARK(BM_CouplingGenerator);

}  // namespace

BENCHMARK_MAIN();
