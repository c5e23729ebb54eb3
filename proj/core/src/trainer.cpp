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

#include "plexfed/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "plexfed/augment.hpp"
#include "plexfed/error.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

std::uint64_t default_eval_every(std::uint64_t max_iters) { return std::max<std::uint64_t>(1, max_iters / 50); }

namespace {

double mean_dice_cached(const SegmenterParams& p, const std::vector<FeatureMap>& features,
                        const std::vector<LabeledVolume>& pairs) {
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto probs = predict_probs(p, features[i]);
    total += dice(binarize(probs, pairs[i].mask.info), pairs[i].mask);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

double mean_dice(const SegmenterParams& p, const std::vector<LabeledVolume>& pairs) {
  require(!pairs.empty(), ErrorCode::kInvalidArgument, "mean_dice over an empty set");
  std::vector<FeatureMap> features;
  for (const auto& lv : pairs) features.push_back(extract_features(lv.image, p.config));
  return mean_dice_cached(p, features, pairs);
}

TrainResult train(const SegmenterParams& init, const std::vector<LabeledVolume>& train_pairs,
                  const std::vector<LabeledVolume>& val_pairs, const TrainOptions& options) {
  init.validate();
  require(!train_pairs.empty(), ErrorCode::kInvalidArgument, "train: empty training set");
  require(!val_pairs.empty(), ErrorCode::kInvalidArgument, "train: empty validation set");
  for (const auto& lv : train_pairs) validate_pair(lv.image, lv.mask);
  for (const auto& lv : val_pairs) validate_pair(lv.image, lv.mask);

  std::vector<FeatureMap> train_features, val_features;
  for (const auto& lv : train_pairs) train_features.push_back(extract_features(lv.image, init.config));
  for (const auto& lv : val_pairs) val_features.push_back(extract_features(lv.image, init.config));

  const std::uint64_t eval_every = options.eval_every ? options.eval_every : default_eval_every(options.max_iters);

  SegmenterParams current = init;
  AdamWState state(current.weights.size(), options.optimizer);
  TrainResult result;
  result.params = current;
  auto evaluate = [&](std::uint64_t step) {
    const double d = mean_dice_cached(current, val_features, val_pairs);
    result.history.push_back({step, d});
    if (result.history.size() == 1 || d > result.best_val_dice) {
      result.best_val_dice = d;
      result.params = current;
    }
  };
  evaluate(0);

  std::vector<std::size_t> order(train_pairs.size());
  const std::size_t n = train_pairs.size();
  for (std::uint64_t step = 0; step < options.max_iters; ++step) {
    if (step % n == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed(options.seed, {0x5EEDull, step / n}));
      shuffle_rng.shuffle(order);
    }
    const std::size_t idx = order[step % n];
    const auto& pair = train_pairs[idx];
    LossAndGrad lg;
    const std::uint64_t aug_seed = derive_seed(options.seed, {0xA06ull, step});
    if (options.augment && plan_augmentation(aug_seed).any()) {
      const LabeledVolume aug = augment(pair.image, pair.mask, aug_seed);
      lg = loss_and_grad(current, extract_features(aug.image, current.config), aug.mask, options.loss);
    } else {
      lg = loss_and_grad(current, train_features[idx], pair.mask, options.loss);
    }
    adamw_step(state, current.weights, lg.grad);
    const std::uint64_t done = step + 1;
    if (done % eval_every == 0 || done == options.max_iters) evaluate(done);
  }
  return result;
}

}  // namespace plexfed
