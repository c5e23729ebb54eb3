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
#include <span>
#include <vector>

#include "plexfed/features.hpp"
#include "plexfed/volume.hpp"

namespace plexfed {

// Per-voxel logistic classifier: p = sigmoid(w . f + b).
struct SegmenterParams {
  FeatureConfig config;
  std::vector<double> weights;  // |features| entries followed by the bias
  std::uint64_t init_seed = 0;

  std::size_t feature_count() const { return config.features.size(); }
  double bias() const { return weights.back(); }
  // Throws kInvalidArgument on a length mismatch, kNonFinite on NaN/inf.
  void validate() const;
  bool operator==(const SegmenterParams&) const = default;
};

// Zero bias, weights uniform in [-0.1, 0.1] from `seed`.
SegmenterParams init_params(const FeatureConfig& cfg, std::uint64_t seed);

std::vector<double> predict_probs(const SegmenterParams& p, const FeatureMap& features);
std::vector<double> predict_probs(const SegmenterParams& p, const Volume& v);

// Label 1 iff prob > threshold. Throws kInvalidArgument for a threshold outside [0, 1].
Mask binarize(std::span<const double> probs, const GridInfo& grid, double threshold = 0.5);

inline constexpr double kSoftDiceEpsilon = 1e-5;
inline constexpr double kProbabilityClamp = 1e-7;

struct LossWeights {
  double dice = 1.0;
  double ce = 1.0;
};

struct LossTerms {
  double cross_entropy = 0.0;  // mean binary cross-entropy
  double soft_dice = 0.0;      // 1 - soft Dice, in [0, 1]
  double total = 0.0;
};

LossTerms loss_terms(std::span<const double> probs, const Mask& gt, LossWeights weights = {});
double loss(std::span<const double> probs, const Mask& gt, LossWeights weights = {});

// Analytic gradient of `loss` with respect to weights and bias.
std::vector<double> grad_loss(const SegmenterParams& p, const FeatureMap& features, const Mask& gt,
                              LossWeights weights = {});
std::vector<double> grad_loss(const SegmenterParams& p, const Volume& v, const Mask& gt,
                              LossWeights weights = {});

// Loss and gradient from one forward pass.
struct LossAndGrad {
  LossTerms loss;
  std::vector<double> grad;
};
LossAndGrad loss_and_grad(const SegmenterParams& p, const FeatureMap& features, const Mask& gt,
                          LossWeights weights = {});

}  // namespace plexfed
