// Copyright 2026 The mixmra Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <vector>

#include <benchmark/benchmark.h>

#include "mixmra/basis.hpp"
#include "mixmra/covariance.hpp"
#include "mixmra/random.hpp"
#include "mixmra/sampler.hpp"
#include "mixmra/simulate.hpp"

namespace {

using namespace mixmra;

void BM_BesselK(benchmark::State& state) {
  const BesselK k(0.01 * static_cast<double>(state.range(0)));
  double x = 0.01, sum = 0.0;
  for (auto _ : state) {
    sum += k(x);
    x = x > 20.0 ? 0.01 : x * 1.01;
  }
  benchmark::DoNotOptimize(sum);
}
BENCHMARK(BM_BesselK)->Arg(30)->Arg(100)->Arg(175);

void BM_Matern(benchmark::State& state) {
  const auto mode = state.range(0) ? MaternKernel::Evaluation::kTabulated : MaternKernel::Evaluation::kDirect;
  const MaternKernel k(CovarianceParams{1.0, 0.1, 1.3}, mode);
  double d = 1e-4, sum = 0.0;
  for (auto _ : state) {
    sum += k(d);
    d = d > 2.0 ? 1e-4 : d * 1.01;
  }
  benchmark::DoNotOptimize(sum);
}
BENCHMARK(BM_Matern)->Arg(0)->Arg(1);

std::vector<Location> locations(int n) {
  Rng rng(1);
  return uniform_locations(n, Rect{}, rng);
}

void BM_BasisBuild(benchmark::State& state) {
  const std::vector<Location> pts = locations(static_cast<int>(state.range(0)));
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{3, 4, 16, PartitionMode::kRectangular, 0, false});
  for (auto _ : state) {
    benchmark::DoNotOptimize(BasisSystem::build(tree, pts, CovarianceParams{1.0, 0.1, 1.0}));
  }
}
BENCHMARK(BM_BasisBuild)->Arg(756)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  SimSpec spec = SimSpec::defaults(Study::kTwoRegion);
  const Sim2Result sim = simulate_sim2(spec, 0);
  const PartitionTree tree = PartitionTree::build(Rect{}, TreeOptions{3, 4, 16, PartitionMode::kRectangular, 0, false});
  ChainConfig cfg;
  cfg.n_iter = 1 << 30;
  cfg.n_burn = 1 << 29;
  cfg.estimate_theta = state.range(0) != 0;
  Sampler s(sim.data.training(), tree, cfg, MixtureHyper{});
  for (auto _ : state) s.sweep();
}
BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
