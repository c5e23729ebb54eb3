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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plexfed/volume.hpp"

namespace plexfed {

enum class Feature {
  kIntensity,
  kLocalMean,
  kLocalStd,
  kGradientMagnitude,
  kCoordX,
  kCoordY,
  kCoordZ,
};

std::string_view to_string(Feature f);
// Throws kFormat for an unknown name.
Feature feature_from_string(std::string_view name);

struct FeatureConfig {
  std::string config_id;
  std::vector<Feature> features;  // order is part of the model
  int radius = 1;                 // cubic window radius for local statistics

  void validate() const;
  bool operator==(const FeatureConfig&) const = default;
};

// Row-major: one row of `width` values per voxel, x-fastest voxel order.
struct FeatureMap {
  std::size_t voxels = 0;
  std::size_t width = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t voxel) const {
    return std::span(values).subspan(voxel * width, width);
  }
  double at(std::size_t voxel, std::size_t feature) const { return values[voxel * width + feature]; }
};

// Local statistics use a (2r+1)^3 window with edge clamping; the gradient is
// a central difference in voxel units; coordinates are scaled to [0, 1].
FeatureMap extract_features(const Volume& v, const FeatureConfig& cfg);

// The five ensemble slots: two rich configs (7 features, r=2), two mid-size
// (5 features, r=1) and one compact (4 features).
std::vector<FeatureConfig> default_config_pool();

}  // namespace plexfed
