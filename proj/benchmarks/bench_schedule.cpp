/*
Copyright 2026 The mmpipe Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#include <benchmark/benchmark.h>

#include "mmpipe/budget.hpp"
#include "mmpipe/mixer.hpp"
#include "mmpipe/rng.hpp"
#include "mmpipe/runspec.hpp"
#include "mmpipe/schedule.hpp"

namespace {

using namespace mmpipe;

void BM_ParentLr(benchmark::State& state) {
  const auto parent = parent_schedule(scale_1b());
  double t = 0.0;
  const double step = parent.total_tokens / 4096.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lr_at(parent, t));
    t = t + step > parent.total_tokens ? 0.0 : t + step;
  }
}
BENCHMARK(BM_ParentLr);

void BM_BranchLr(benchmark::State& state) {
  const RunSpec spec;
  const auto parent = parent_schedule(spec.scale);
  const auto b = branch(parent, 0.8, 28e9, spec);
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(branch_lr_at(b, t));
    t = t + 1e7 > 28e9 ? 0.0 : t + 1e7;
  }
}
BENCHMARK(BM_BranchLr);

void BM_ShuffleOrder(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(shuffle_order(n, seed++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ShuffleOrder)->Arg(1 << 10)->Arg(1 << 16);

void BM_BoundedDraw(benchmark::State& state) {
  Xoshiro256ss rng(42);
  for (auto _ : state) benchmark::DoNotOptimize(rng.bounded(1'000'003));
}
BENCHMARK(BM_BoundedDraw);

}  // namespace
