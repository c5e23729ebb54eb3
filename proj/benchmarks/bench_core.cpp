/*
 * Copyright (c) 2026 The plexfed Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include "plexfed/bundle.hpp"
#include "plexfed/features.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/optimizer.hpp"
#include "plexfed/phantom.hpp"
#include "plexfed/segmenter.hpp"

namespace {

using namespace plexfed;

LabeledVolume phantom(int n) {
  DomainSpec spec;
  spec.domain_id = "bench";
  spec.dims = {n, n, n};
  auto lv = generate_phantom(spec, 7);
  lv.image = normalize_intensity(lv.image);
  return lv;
}

void BM_ExtractFeatures(benchmark::State& state) {
  const auto lv = phantom(static_cast<int>(state.range(0)));
  const auto cfg = default_config_pool()[static_cast<std::size_t>(state.range(1))];
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(lv.image, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(lv.image.size()));
}
BENCHMARK(BM_ExtractFeatures)->Args({24, 0})->Args({24, 4})->Args({32, 0});

void BM_TrainingStep(benchmark::State& state) {
  const auto lv = phantom(static_cast<int>(state.range(0)));
  SegmenterParams p = init_params(default_config_pool()[0], 3);
  const auto fm = extract_features(lv.image, p.config);
  AdamWState opt(p.weights.size());
  for (auto _ : state) {
    const auto lg = loss_and_grad(p, fm, lv.mask);
    adamw_step(opt, p.weights, lg.grad);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(lv.image.size()));
}
BENCHMARK(BM_TrainingStep)->Arg(24)->Arg(32);

void BM_EnsemblePredict(benchmark::State& state) {
  const auto lv = phantom(24);
  ModelBundle b;
  const auto pool = default_config_pool();
  for (std::size_t s = 0; s < kSlotCount; ++s) b.slots[s] = init_params(pool[s], s);
  for (auto _ : state) benchmark::DoNotOptimize(ensemble_predict(b, lv.image));
}
BENCHMARK(BM_EnsemblePredict);

void BM_Dice(benchmark::State& state) {
  const auto a = phantom(32);
  auto b = phantom(32).mask;
  for (std::size_t i = 0; i < b.labels.size(); i += 97) b.labels[i] ^= 1u;
  for (auto _ : state) benchmark::DoNotOptimize(dice(a.mask, b));
}
BENCHMARK(BM_Dice);

}  // namespace
BENCHMARK_MAIN();
