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

#pragma once

#include <cstdint>
#include <vector>

#include "plexfed/optimizer.hpp"
#include "plexfed/segmenter.hpp"

namespace plexfed {

// Step size used by the training regimes. The optimizer's own default stays at 1e-4;
// a per-voxel linear model on [0,1] features needs larger steps to leave its
// initialization within the default iteration budgets.
inline constexpr double kTrainingLearningRate = 3e-2;

inline AdamWConfig training_optimizer() {
  AdamWConfig c;
  c.lr = kTrainingLearningRate;
  return c;
}

struct TrainOptions {
  std::uint64_t max_iters = 0;
  bool augment = false;
  std::uint64_t seed = 0;
  // 0 selects max(1, max_iters / 50).
  std::uint64_t eval_every = 0;
  LossWeights loss{};
  AdamWConfig optimizer = training_optimizer();
};

struct ValidationPoint {
  std::uint64_t step = 0;  // optimizer updates applied before this evaluation
  double dice = 0.0;       // mean Dice over the validation pairs
};

struct TrainResult {
  SegmenterParams params;  // best-validation snapshot
  double best_val_dice = 0.0;
  std::vector<ValidationPoint> history;
};

std::uint64_t default_eval_every(std::uint64_t max_iters);

// Mean Dice of the slot's binarized prediction over `pairs`.
double mean_dice(const SegmenterParams& p, const std::vector<LabeledVolume>& pairs);

// One pair per optimizer step, cycling through a reshuffled order each
// epoch; optional augmentation per step. Validation runs before the first
// step and every eval_every steps; the best snapshot (earliest on ties) is
// returned. Throws kInvalidArgument for empty train or validation sets.
TrainResult train(const SegmenterParams& init, const std::vector<LabeledVolume>& train_pairs,
                  const std::vector<LabeledVolume>& val_pairs, const TrainOptions& options);

}  // namespace plexfed
