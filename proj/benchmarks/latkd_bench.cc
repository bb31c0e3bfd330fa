// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Microbenchmarks for the hot loops: MLP training epochs, GBT boosting
// rounds with and without teachers, and AUPRC.

#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "latkd/driftgen.h"
#include "latkd/eval.h"
#include "latkd/gbt.h"
#include "latkd/mlp.h"
#include "latkd/random.h"

namespace {

const latkd::DesignMatrix& Frame(std::size_t rows) {
  static std::map<std::size_t, latkd::DesignMatrix> cache;
  auto it = cache.find(rows);
  if (it == cache.end()) {
    latkd::GeneratedStream s = latkd::Generate(latkd::RecurringPatternScenario(1, 3, rows, 1, 2));
    it = cache.emplace(rows, std::move(s.frames[0])).first;
  }
  return it->second;
}

latkd::CompositeLossSpec Teachers(std::size_t rows, int n) {
  latkd::CompositeLossSpec spec;
  latkd::Rng rng(7);
  for (int i = 0; i < n; ++i) {
    latkd::ProbMatrix q(rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      double p = rng.Uniform();
      q(r, 0) = 1.0 - p;
      q(r, 1) = p;
    }
    spec.teacher_outputs.push_back(std::move(q));
  }
  return spec;
}

void BM_MlpEpoch(benchmark::State& state) {
  const auto& data = Frame(static_cast<std::size_t>(state.range(0)));
  auto spec = Teachers(data.rows(), static_cast<int>(state.range(1)));
  latkd::MlpArchitecture arch;
  arch.input_dim = data.cols();
  arch.hidden = {64, 64};
  latkd::MlpTrainOptions opts;
  opts.max_epochs = 1;
  opts.early_stop = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(latkd::TrainMlp(data, spec, arch, opts));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.rows()));
}
BENCHMARK(BM_MlpEpoch)->Args({4000, 0})->Args({4000, 3})->Unit(benchmark::kMillisecond);

void BM_GbtRounds(benchmark::State& state) {
  const auto& data = Frame(static_cast<std::size_t>(state.range(0)));
  auto spec = Teachers(data.rows(), static_cast<int>(state.range(1)));
  latkd::GbtConfig config;
  config.n_estimators = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(latkd::TrainGbt(data, spec, config));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.rows()));
}
BENCHMARK(BM_GbtRounds)->Args({4000, 0})->Args({4000, 3})->Args({20000, 0})
    ->Unit(benchmark::kMillisecond);

void BM_Auprc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  latkd::Rng rng(3);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.Uniform();
    labels[i] = rng.Uniform() < 0.05 ? 1 : 0;
  }
  labels[0] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(latkd::Auprc(scores, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auprc)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
