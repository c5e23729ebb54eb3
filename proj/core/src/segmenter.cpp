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

#include "plexfed/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "plexfed/error.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

void SegmenterParams::validate() const {
  config.validate();
  require(weights.size() == config.features.size() + 1, ErrorCode::kInvalidArgument,
          "weight vector must have |features| + 1 entries");
  require(std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); }),
          ErrorCode::kNonFinite, "segmenter weights must be finite");
}

SegmenterParams init_params(const FeatureConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SegmenterParams p{cfg, std::vector<double>(cfg.features.size() + 1, 0.0), seed};
  Rng rng(seed);
  for (std::size_t k = 0; k < cfg.features.size(); ++k) p.weights[k] = rng.uniform(-0.1, 0.1);
  return p;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_map(const SegmenterParams& p, const FeatureMap& f) {
  p.validate();
  require(f.width == p.feature_count(), ErrorCode::kInvalidArgument,
          "feature map width does not match the segmenter config");
}

}  // namespace

std::vector<double> predict_probs(const SegmenterParams& p, const FeatureMap& features) {
  check_map(p, features);
  const std::size_t w = features.width;
  const double b = p.bias();
  std::vector<double> out(features.voxels);
  for (std::size_t i = 0; i < features.voxels; ++i) {
    const double* row = &features.values[i * w];
    double z = b;
    for (std::size_t k = 0; k < w; ++k) z += p.weights[k] * row[k];
    out[i] = sigmoid(z);
  }
  return out;
}

std::vector<double> predict_probs(const SegmenterParams& p, const Volume& v) {
  p.validate();
  return predict_probs(p, extract_features(v, p.config));
}

Mask binarize(std::span<const double> probs, const GridInfo& grid, double threshold) {
  require(threshold >= 0.0 && threshold <= 1.0, ErrorCode::kInvalidArgument,
          "binarize threshold must lie in [0, 1]");
  require(probs.size() == grid.dims.count(), ErrorCode::kInvalidArgument,
          "probability map does not match the grid");
  Mask m(grid);
  for (std::size_t i = 0; i < probs.size(); ++i) m.labels[i] = probs[i] > threshold ? 1 : 0;
  return m;
}

LossTerms loss_terms(std::span<const double> probs, const Mask& gt, LossWeights weights) {
  require(probs.size() == gt.size(), ErrorCode::kInvalidArgument, "probs and mask are not aligned");
  require(!probs.empty(), ErrorCode::kInvalidArgument, "empty probability map");
  double ce = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const double g = gt.labels[i];
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    ce -= g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc);
    inter += p * g;
    psum += p;
    gsum += g;
  }
  LossTerms t;
  t.cross_entropy = ce / static_cast<double>(probs.size());
  t.soft_dice = 1.0 - (2.0 * inter + kSoftDiceEpsilon) / (psum + gsum + kSoftDiceEpsilon);
  t.total = weights.ce * t.cross_entropy + weights.dice * t.soft_dice;
  return t;
}

double loss(std::span<const double> probs, const Mask& gt, LossWeights weights) {
  return loss_terms(probs, gt, weights).total;
}

LossAndGrad loss_and_grad(const SegmenterParams& p, const FeatureMap& features, const Mask& gt,
                          LossWeights weights) {
  check_map(p, features);
  require(features.voxels == gt.size(), ErrorCode::kInvalidArgument, "features and mask are not aligned");
  const std::vector<double> probs = predict_probs(p, features);
  LossAndGrad out;
  out.loss = loss_terms(probs, gt, weights);

  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * gt.labels[i];
    psum += probs[i];
    gsum += gt.labels[i];
  }
  const double denom = psum + gsum + kSoftDiceEpsilon;
  const double numer = 2.0 * inter + kSoftDiceEpsilon;
  const double n = static_cast<double>(probs.size());
  const std::size_t w = features.width;
  out.grad.assign(w + 1, 0.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double pr = probs[i];
    const double g = gt.labels[i];
    const double dsig = pr * (1.0 - pr);
    // The clamp inside the cross-entropy has zero slope outside its range.
    double dce_dz = 0.0;
    if (pr >= kProbabilityClamp && pr <= 1.0 - kProbabilityClamp) dce_dz = (pr - g) / n;
    const double ddice_dp = -(2.0 * g * denom - numer) / (denom * denom);
    const double dz = weights.ce * dce_dz + weights.dice * ddice_dp * dsig;
    const double* row = &features.values[i * w];
    for (std::size_t k = 0; k < w; ++k) out.grad[k] += dz * row[k];
    out.grad[w] += dz;
  }
  return out;
}

std::vector<double> grad_loss(const SegmenterParams& p, const FeatureMap& features, const Mask& gt,
                              LossWeights weights) {
  return loss_and_grad(p, features, gt, weights).grad;
}

std::vector<double> grad_loss(const SegmenterParams& p, const Volume& v, const Mask& gt, LossWeights weights) {
  p.validate();
  return grad_loss(p, extract_features(v, p.config), gt, weights);
}

}  // namespace plexfed
