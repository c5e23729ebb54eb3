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
#include <string_view>

#include "plexfed/volume.hpp"

namespace plexfed {

enum class Augmentation : int {
  kFlipRotate = 0,
  kIntensityShift,
  kBiasField,
  kGibbs,
  kMotion,
  kElastic,
  kGhost,
};
inline constexpr std::size_t kAugmentationCount = 7;

inline constexpr std::array<double, kAugmentationCount> kAugmentationProbability = {
    0.15, 0.15, 0.15, 0.15, 0.30, 0.30, 0.30};

std::string_view to_string(Augmentation a);

// Fixed transform amplitudes.
inline constexpr double kIntensityShiftMax = 0.1;
inline constexpr double kBiasFieldAmplitude = 0.3;
inline constexpr double kGibbsKeepFraction = 0.5;
inline constexpr double kMotionWeight = 0.3;
inline constexpr int kMotionMaxShift = 3;
inline constexpr double kGhostWeight = 0.2;
inline constexpr double kElasticMaxDisplacement = 1.5;  // voxels
inline constexpr int kElasticControlPoints = 5;

struct AugmentPlan {
  std::array<bool, kAugmentationCount> fires{};

  bool fired(Augmentation a) const { return fires[static_cast<std::size_t>(a)]; }
  bool any() const;
  bool any_geometric() const { return fired(Augmentation::kFlipRotate) || fired(Augmentation::kElastic); }
};

// Which transforms fire for a seed; each fires independently.
AugmentPlan plan_augmentation(std::uint64_t rng_seed);

// Executes plan_augmentation(rng_seed). Geometric transforms move the mask
// with the volume; intensity transforms touch the volume only.
LabeledVolume augment(const Volume& v, const Mask& m, std::uint64_t rng_seed);

}  // namespace plexfed
