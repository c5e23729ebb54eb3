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

#include "plexfed/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include "plexfed/error.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

TrainOptions train_options(const RegimeOptions& o, std::uint64_t max_iters, std::uint64_t seed) {
  TrainOptions t;
  t.max_iters = max_iters;
  t.augment = o.augment;
  t.seed = seed;
  t.loss = o.loss;
  t.optimizer = o.optimizer;
  return t;
}

std::vector<std::string> dataset_ids(const std::vector<LabeledVolume>& pairs) {
  std::vector<std::string> ids;
  for (const auto& lv : pairs) {
    if (std::find(ids.begin(), ids.end(), lv.image.info.dataset_id) == ids.end()) {
      ids.push_back(lv.image.info.dataset_id);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

SlotTrainingResult train_slots(const ModelBundle& base, const std::vector<LabeledVolume>& subjects,
                               const RegimeOptions& options, std::uint64_t iterations, TrainingKind kind) {
  base.validate();
  auto [train_idx, val_idx] = half_split(subjects.size(), derive_seed(options.seed, {0x5917ull}));
  std::vector<LabeledVolume> train_set, val_set;
  SlotTrainingResult out;
  for (auto i : train_idx) {
    train_set.push_back(subjects[i]);
    out.split.train_ids.push_back(subjects[i].image.info.subject_id);
  }
  for (auto i : val_idx) {
    val_set.push_back(subjects[i]);
    out.split.val_ids.push_back(subjects[i].image.info.subject_id);
  }

  out.bundle = base;
  out.iterations = iterations;
  TrainingEvent event{kind, dataset_ids(subjects), iterations, options.seed, {}, ""};
  std::array<TrainResult, kSlotCount> results;
  parallel_for(kSlotCount, options.workers, [&](std::size_t s) {
    results[s] = train(base.slots[s], train_set, val_set,
                       train_options(options, iterations, derive_seed(options.seed, {0x5107ull, s})));
  });
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    out.bundle.slots[s] = results[s].params;
    out.pre_val_dice[s] = results[s].history.front().dice;
    out.history[s] = results[s].history;
    event.slot_val_dice[s] = results[s].best_val_dice;
  }
  out.bundle.parent_hash = to_hex(bundle_checksum(base));
  if (!options.version_label.empty()) out.bundle.version = options.version_label;
  out.bundle.provenance.push_back(std::move(event));
  return out;
}

}  // namespace

std::size_t argmax_lowest(const std::vector<double>& scores) {
  require(!scores.empty(), ErrorCode::kInvalidArgument, "argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> half_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t half = n / 2;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return {train, val};
}

InitialTrainingResult initial_training(const std::vector<LabeledVolume>& dataset,
                                       const std::vector<FeatureConfig>& configs,
                                       const RegimeOptions& options) {
  require(dataset.size() >= kMinLabeledVolumes, ErrorCode::kInsufficientVolumes,
          "initial training needs at least ten subjects, got " + std::to_string(dataset.size()));
  require(!configs.empty(), ErrorCode::kInvalidArgument, "initial training needs candidate configs");

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(options.seed, {0xF01Dull}));
  split_rng.shuffle(order);
  std::vector<std::size_t> fold_of(dataset.size());
  InitialTrainingResult out;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    fold_of[order[pos]] = pos % kFoldCount;
    out.split.fold_of[dataset[order[pos]].image.info.subject_id] = pos % kFoldCount;
  }

  const std::size_t njobs = kFoldCount * configs.size();
  std::vector<TrainResult> results(njobs);
  parallel_for(njobs, options.workers, [&](std::size_t job) {
    const std::size_t fold = job / configs.size();
    const std::size_t c = job % configs.size();
    std::vector<LabeledVolume> train_set, val_set;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      (fold_of[i] == fold ? val_set : train_set).push_back(dataset[i]);
    }
    const SegmenterParams init = init_params(configs[c], derive_seed(options.seed, {0x1417ull, fold, c}));
    results[job] = train(init, train_set, val_set,
                         train_options(options, options.max_iters, derive_seed(options.seed, {0x7EA1ull, fold, c})));
  });

  TrainingEvent event{TrainingKind::kInitial, dataset_ids(dataset), options.max_iters, options.seed, {}, ""};
  for (std::size_t fold = 0; fold < kFoldCount; ++fold) {
    auto& scores = out.candidate_dice[fold];
    for (std::size_t c = 0; c < configs.size(); ++c) scores.push_back(results[fold * configs.size() + c].best_val_dice);
    const std::size_t win = argmax_lowest(scores);
    const auto& best = results[fold * configs.size() + win];
    out.winner[fold] = win;
    out.winner_history[fold] = best.history;
    out.bundle.slots[fold] = best.params;
    event.slot_val_dice[fold] = best.best_val_dice;
    event.note += (fold ? "," : "") + configs[win].config_id;
  }
  out.bundle.version = options.version_label.empty() ? "model0" : options.version_label;
  out.bundle.provenance.push_back(std::move(event));
  return out;
}

SlotTrainingResult fine_tune(const ModelBundle& base, const std::vector<LabeledVolume>& subjects,
                             const RegimeOptions& options) {
  require(subjects.size() >= kMinLabeledVolumes, ErrorCode::kInsufficientVolumes,
          "fine-tuning needs at least ten labelled subjects, got " + std::to_string(subjects.size()));
  return train_slots(base, subjects, options, options.max_iters, TrainingKind::kFineTune);
}

std::uint64_t incremental_budget(std::uint64_t iteration_cap, std::uint64_t epochs, std::size_t train_count) {
  return std::min<std::uint64_t>(iteration_cap, epochs * static_cast<std::uint64_t>(train_count));
}

SlotTrainingResult local_incremental_learn(const ModelBundle& base, const std::vector<LabeledVolume>& volumes,
                                           const IncrementalOptions& options) {
  require(volumes.size() >= kMinLabeledVolumes, ErrorCode::kInsufficientVolumes,
          "insufficient volumes: incremental learning needs at least ten labelled 3D volumes, got " +
              std::to_string(volumes.size()));
  const std::uint64_t budget = incremental_budget(options.regime.max_iters, options.epochs, volumes.size() / 2);
  return train_slots(base, volumes, options.regime, budget, TrainingKind::kIncremental);
}

Mask oracle_annotate(const Mask& pred, const Mask& gt, double corruption_rate, std::uint64_t seed) {
  validate(gt);
  require(pred.info.same_grid(gt.info), ErrorCode::kInvalidArgument, "oracle_annotate: masks not aligned");
  require(corruption_rate >= 0.0 && corruption_rate < 1.0, ErrorCode::kInvalidArgument,
          "corruption_rate must lie in [0, 1)");
  Mask out = gt;
  if (corruption_rate == 0.0) return out;
  const Dims d = gt.dims();
  std::vector<std::size_t> boundary;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (!gt.labels[d.index(x, y, z)]) continue;
        bool edge = false;
        constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : kOff) {
          const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
          if (xx < 0 || yy < 0 || zz < 0 || xx >= d.nx || yy >= d.ny || zz >= d.nz ||
              !gt.labels[d.index(xx, yy, zz)]) {
            edge = true;
            break;
          }
        }
        if (edge) boundary.push_back(d.index(x, y, z));
      }
  const auto flips = static_cast<std::size_t>(std::floor(corruption_rate * static_cast<double>(boundary.size())));
  Rng rng(seed);
  rng.shuffle(boundary);
  for (std::size_t i = 0; i < flips; ++i) out.labels[boundary[i]] ^= 1u;
  return out;
}

}  // namespace plexfed
