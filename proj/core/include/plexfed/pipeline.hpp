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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "plexfed/bundle.hpp"
#include "plexfed/trainer.hpp"

namespace plexfed {

inline constexpr std::size_t kFoldCount = 5;
inline constexpr std::size_t kMinLabeledVolumes = 10;
inline constexpr std::uint64_t kDefaultInitialIters = 3000;
inline constexpr std::uint64_t kLocalEpochs = 5;

// Budgets keep the 3e4 : 1e4 : 4e3 ratio of initial, fine-tune and
// incremental training.
struct IterationBudgets {
  std::uint64_t initial = kDefaultInitialIters;
  std::uint64_t fine_tune() const { return initial / 3; }
  std::uint64_t incremental_cap() const { return initial * 4 / 30; }
};

struct RegimeOptions {
  std::uint64_t max_iters = 0;
  std::uint64_t seed = 0;
  bool augment = true;
  unsigned workers = 1;  // parallel jobs; results do not depend on it
  LossWeights loss{};
  AdamWConfig optimizer = training_optimizer();
  std::string version_label;
};

struct SplitPlan {
  std::map<std::string, std::size_t> fold_of;  // initial training only
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

struct InitialTrainingResult {
  ModelBundle bundle;
  SplitPlan split;
  // candidate_dice[fold][config]: best validation Dice of that candidate.
  std::array<std::vector<double>, kFoldCount> candidate_dice;
  std::array<std::size_t, kFoldCount> winner{};
  std::array<std::vector<ValidationPoint>, kFoldCount> winner_history;
};

// Five-fold cross-validation over every candidate config; the best config
// instance per fold (lowest index on ties) becomes that fold's slot.
// Throws kInsufficientVolumes for fewer than ten subjects.
InitialTrainingResult initial_training(const std::vector<LabeledVolume>& dataset,
                                       const std::vector<FeatureConfig>& configs,
                                       const RegimeOptions& options);

// Index of the best score; ties go to the lowest index.
std::size_t argmax_lowest(const std::vector<double>& scores);

struct SlotTrainingResult {
  ModelBundle bundle;
  SplitPlan split;
  std::uint64_t iterations = 0;
  std::array<double, kSlotCount> pre_val_dice{};
  std::array<std::vector<ValidationPoint>, kSlotCount> history;
};

// Seeded 50/50 train/validation split, then every slot continues training
// from its current weights. The base bundle is left untouched.
SlotTrainingResult fine_tune(const ModelBundle& base, const std::vector<LabeledVolume>& subjects,
                             const RegimeOptions& options);

struct IncrementalOptions {
  RegimeOptions regime;  // regime.max_iters is the iteration cap
  std::uint64_t epochs = kLocalEpochs;
};

// Same split-and-train procedure with budget
// min(iteration cap, epochs * |train set|).
// Throws kInsufficientVolumes for fewer than ten labeled volumes.
SlotTrainingResult local_incremental_learn(const ModelBundle& base, const std::vector<LabeledVolume>& volumes,
                                           const IncrementalOptions& options);

std::uint64_t incremental_budget(std::uint64_t iteration_cap, std::uint64_t epochs, std::size_t train_count);

// Simulated expert correction: returns gt with floor(rate * |boundary|)
// seeded boundary voxels flipped. rate must lie in [0, 1).
Mask oracle_annotate(const Mask& pred, const Mask& gt, double corruption_rate, std::uint64_t seed);

// 50/50 seeded split of subject indices (train first half).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> half_split(std::size_t n, std::uint64_t seed);

}  // namespace plexfed
