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

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "plexfed/error.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/pipeline.hpp"
#include "support.hpp"

namespace plexfed {
namespace {

RegimeOptions regime(std::uint64_t iters, std::uint64_t seed, bool augment = false) {
  RegimeOptions o;
  o.max_iters = iters;
  o.seed = seed;
  o.augment = augment;
  return o;
}

double median_ensemble_dice(const ModelBundle& b, const std::vector<LabeledVolume>& set) {
  std::vector<double> d;
  for (const auto& lv : set) d.push_back(dice(ensemble_predict(b, lv.image), lv.mask));
  return median_iqr(d).median;
}

// Shared across the suite: initial training is the expensive step.
class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new std::vector<LabeledVolume>(testing::separable_set(10, 100, "S"));
    heldout_ = new std::vector<LabeledVolume>(testing::separable_set(6, 500, "S"));
    initial_ = new InitialTrainingResult(initial_training(*train_, default_config_pool(), regime(300, 11)));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete heldout_;
    delete initial_;
  }
  static std::vector<LabeledVolume>* train_;
  static std::vector<LabeledVolume>* heldout_;
  static InitialTrainingResult* initial_;
};
std::vector<LabeledVolume>* PipelineTest::train_ = nullptr;
std::vector<LabeledVolume>* PipelineTest::heldout_ = nullptr;
InitialTrainingResult* PipelineTest::initial_ = nullptr;

TEST_F(PipelineTest, InitialTrainingSolvesSeparableTask) {
  EXPECT_GE(median_ensemble_dice(initial_->bundle, *heldout_), 0.95);
  ASSERT_EQ(initial_->bundle.provenance.size(), 1u);
  EXPECT_EQ(initial_->bundle.provenance[0].kind, TrainingKind::kInitial);
  EXPECT_EQ(initial_->bundle.provenance[0].datasets, std::vector<std::string>{"S"});
  EXPECT_NO_THROW(initial_->bundle.validate());
}

TEST_F(PipelineTest, FoldsPartitionSubjects) {
  const auto& folds = initial_->split.fold_of;
  ASSERT_EQ(folds.size(), train_->size());
  std::array<int, kFoldCount> sizes{};
  for (const auto& [id, f] : folds) {
    ASSERT_LT(f, kFoldCount);
    ++sizes[f];
  }
  for (int s : sizes) EXPECT_EQ(s, 2);
}

TEST_F(PipelineTest, WinnerIsArgmaxWithLowestIndexOnTies) {
  for (std::size_t fold = 0; fold < kFoldCount; ++fold) {
    const auto& scores = initial_->candidate_dice[fold];
    ASSERT_EQ(scores.size(), kSlotCount);
    const std::size_t w = initial_->winner[fold];
    for (std::size_t c = 0; c < scores.size(); ++c) {
      EXPECT_GE(scores[w], scores[c]);
      if (c < w) {
        EXPECT_LT(scores[c], scores[w]);
      }
    }
    EXPECT_EQ(initial_->bundle.slots[fold].config, default_config_pool()[w]);
    double best = 0.0;
    for (const auto& pt : initial_->winner_history[fold]) best = std::max(best, pt.dice);
    EXPECT_EQ(best, initial_->bundle.provenance[0].slot_val_dice[fold]);
  }
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax_lowest({0.5, 0.9, 0.9, 0.1}), 1u);
  EXPECT_EQ(argmax_lowest({1.0, 1.0, 1.0}), 0u);
  EXPECT_EQ(argmax_lowest({0.1, 0.2, 0.3}), 2u);
  EXPECT_THROW(argmax_lowest({}), Error);
}

TEST(Pipeline, InitialTrainingTiePicksLowestConfig) {
  // Blank volumes with empty masks: every candidate predicts background and scores 1.0.
  auto data = testing::separable_set(10, 300, "Z");
  for (auto& lv : data) {
    std::fill(lv.image.voxels.begin(), lv.image.voxels.end(), 0.0f);
    std::fill(lv.mask.labels.begin(), lv.mask.labels.end(), 0);
  }
  const auto cfg = default_config_pool()[4];
  const auto r = initial_training(data, {cfg, cfg, cfg}, regime(0, 5));
  for (std::size_t fold = 0; fold < kFoldCount; ++fold) {
    ASSERT_EQ(r.candidate_dice[fold][0], r.candidate_dice[fold][1]);
    ASSERT_EQ(r.candidate_dice[fold][1], r.candidate_dice[fold][2]);
    EXPECT_EQ(r.winner[fold], 0u);
  }
}

TEST_F(PipelineTest, InitialTrainingIsDeterministicAndWorkerIndependent) {
  auto o = regime(40, 3);
  const auto a = initial_training(*train_, default_config_pool(), o);
  const auto b = initial_training(*train_, default_config_pool(), o);
  EXPECT_EQ(a.bundle, b.bundle);
  o.workers = 3;
  const auto c = initial_training(*train_, default_config_pool(), o);
  EXPECT_EQ(a.bundle, c.bundle);
}

TEST(Pipeline, InitialTrainingNeedsTenSubjects) {
  const auto data = testing::separable_set(9, 1);
  try {
    initial_training(data, default_config_pool(), regime(10, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientVolumes);
  }
}

TEST_F(PipelineTest, FineTuneSameDomainDoesNotHurtSlots) {
  const auto subjects = testing::separable_set(10, 700, "S");
  const ModelBundle before = initial_->bundle;
  const auto r = fine_tune(initial_->bundle, subjects, regime(100, 4, true));
  EXPECT_EQ(initial_->bundle, before);  // base untouched
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    EXPECT_GE(r.bundle.provenance.back().slot_val_dice[s], r.pre_val_dice[s] - 0.02);
    double best = 0.0;
    for (const auto& pt : r.history[s]) best = std::max(best, pt.dice);
    EXPECT_EQ(best, r.bundle.provenance.back().slot_val_dice[s]);
    EXPECT_EQ(r.pre_val_dice[s], r.history[s].front().dice);
  }
  ASSERT_EQ(r.bundle.provenance.size(), before.provenance.size() + 1);
  EXPECT_EQ(r.bundle.provenance.back().kind, TrainingKind::kFineTune);
  EXPECT_EQ(r.bundle.parent_hash, to_hex(bundle_checksum(before)));
}

TEST_F(PipelineTest, FineTuneSplitIsHalfAndHalf) {
  const auto subjects = testing::separable_set(12, 800, "S");
  const auto r = fine_tune(initial_->bundle, subjects, regime(0, 9));
  EXPECT_EQ(r.split.train_ids.size(), 6u);
  EXPECT_EQ(r.split.val_ids.size(), 6u);
  std::set<std::string> all(r.split.train_ids.begin(), r.split.train_ids.end());
  for (const auto& id : r.split.val_ids) EXPECT_EQ(all.count(id), 0u);
  all.insert(r.split.val_ids.begin(), r.split.val_ids.end());
  EXPECT_EQ(all.size(), 12u);
}

TEST_F(PipelineTest, FineTuneZeroBudgetOnlyAddsEvent) {
  const auto subjects = testing::separable_set(10, 900, "S");
  const auto r = fine_tune(initial_->bundle, subjects, regime(0, 2));
  for (std::size_t s = 0; s < kSlotCount; ++s) EXPECT_EQ(r.bundle.slots[s], initial_->bundle.slots[s]);
  EXPECT_EQ(r.bundle.provenance.size(), initial_->bundle.provenance.size() + 1);
  EXPECT_EQ(r.bundle.provenance.back().iterations, 0u);
}

TEST_F(PipelineTest, FineTuneDeterministicAndNeedsTen) {
  const auto subjects = testing::separable_set(10, 1000, "S");
  const auto a = fine_tune(initial_->bundle, subjects, regime(30, 6, true));
  const auto b = fine_tune(initial_->bundle, subjects, regime(30, 6, true));
  EXPECT_EQ(a.bundle, b.bundle);
  const std::vector<LabeledVolume> nine(subjects.begin(), subjects.begin() + 9);
  EXPECT_THROW(fine_tune(initial_->bundle, nine, regime(30, 6)), Error);
}

TEST_F(PipelineTest, IncrementalNeedsTenVolumes) {
  const auto subjects = testing::separable_set(9, 1100, "S");
  IncrementalOptions o;
  o.regime = regime(400, 1);
  try {
    local_incremental_learn(initial_->bundle, subjects, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientVolumes);
    EXPECT_NE(std::string(e.what()).find("insufficient volumes"), std::string::npos);
  }
}

TEST_F(PipelineTest, IncrementalZeroBudgetKeepsWeights) {
  const auto subjects = testing::separable_set(10, 1200, "S");
  IncrementalOptions o;
  o.regime = regime(0, 1);
  const auto r = local_incremental_learn(initial_->bundle, subjects, o);
  for (std::size_t s = 0; s < kSlotCount; ++s) EXPECT_EQ(r.bundle.slots[s], initial_->bundle.slots[s]);
  EXPECT_EQ(r.bundle.provenance.size(), initial_->bundle.provenance.size() + 1);
  EXPECT_EQ(r.bundle.provenance.back().kind, TrainingKind::kIncremental);
}

TEST(Pipeline, IncrementalBudgetIsDualCapped) {
  EXPECT_EQ(incremental_budget(400, 5, 5), 25u);
  EXPECT_EQ(incremental_budget(20, 5, 5), 20u);
  EXPECT_EQ(incremental_budget(400, 5, 100), 400u);
  IterationBudgets b;
  EXPECT_EQ(b.initial, 3000u);
  EXPECT_EQ(b.fine_tune(), 1000u);
  EXPECT_EQ(b.incremental_cap(), 400u);
}

TEST(Pipeline, IncrementalImprovesOnShiftedSeparableDomain) {
  // The new domain wraps each target in a bright one-voxel shell. It is still separable by
  // intensity, but the base model's threshold sits below the shell and over-segments.
  const auto src = testing::separable_set(10, 2000, "A");
  auto tgt = testing::separable_set(10, 3000, "B");
  auto held = testing::separable_set(8, 4000, "B");
  for (auto* set : {&tgt, &held})
    for (auto& lv : *set) {
      const Dims d = lv.mask.dims();
      for (int z = 1; z + 1 < d.nz; ++z)
        for (int y = 1; y + 1 < d.ny; ++y)
          for (int x = 1; x + 1 < d.nx; ++x) {
            if (lv.mask.labels[d.index(x, y, z)]) continue;
            bool near = false;
            for (int dz = -1; dz <= 1; ++dz)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) near = near || lv.mask.labels[d.index(x + dx, y + dy, z + dz)];
            if (near) lv.image.at(x, y, z) = 0.8f;
          }
    }
  const auto base = initial_training(src, default_config_pool(), regime(200, 1)).bundle;
  IncrementalOptions o;
  o.regime = regime(IterationBudgets{}.incremental_cap(), 2);
  const auto r = local_incremental_learn(base, tgt, o);
  EXPECT_EQ(r.iterations, 25u);
  const double before = median_ensemble_dice(base, held);
  const double after = median_ensemble_dice(r.bundle, held);
  EXPECT_LT(before, 0.9);
  EXPECT_GT(after, before);
}

TEST(Oracle, ZeroRateReturnsTruth) {
  Rng rng(1);
  const auto g = testing::grid(6, 6, 6);
  const auto gt = testing::random_mask(g, rng, 0.2);
  const auto pred = testing::random_mask(g, rng, 0.5);
  EXPECT_EQ(oracle_annotate(pred, gt, 0.0, 3), gt);
}

TEST(Oracle, FlipsExactFractionOfBoundary) {
  Mask gt(testing::grid(24, 4, 3));
  // A 20 x 2 sheet one voxel thick: all 40 foreground voxels touch background.
  for (int x = 2; x < 22; ++x)
    for (int y = 1; y < 3; ++y) gt.labels[gt.info.dims.index(x, y, 1)] = 1;
  ASSERT_EQ(gt.foreground(), 40u);
  const auto out = oracle_annotate(gt, gt, 0.5, 7);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_LE(out.labels[i], 1);
    flips += out.labels[i] != gt.labels[i];
  }
  EXPECT_EQ(flips, 20u);
  EXPECT_EQ(oracle_annotate(gt, gt, 0.5, 7), out);
  EXPECT_THROW(oracle_annotate(gt, gt, 1.0, 7), Error);
}

TEST(Split, HalfSplitPartitions) {
  for (std::size_t n : {10u, 11u, 40u}) {
    const auto [tr, va] = half_split(n, 42);
    EXPECT_EQ(tr.size(), n / 2);
    EXPECT_EQ(tr.size() + va.size(), n);
    std::set<std::size_t> all(tr.begin(), tr.end());
    all.insert(va.begin(), va.end());
    EXPECT_EQ(all.size(), n);
  }
}

}  // namespace
}  // namespace plexfed
