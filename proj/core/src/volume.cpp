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

#include "plexfed/volume.hpp"

#include <algorithm>
#include <numeric>

#include "plexfed/error.hpp"

namespace plexfed {

std::size_t Mask::foreground() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

namespace {

void validate_grid(const GridInfo& g) {
  require(g.dims.nx > 0 && g.dims.ny > 0 && g.dims.nz > 0, ErrorCode::kInvalidArgument,
          "dims must be positive");
  require(g.spacing.sx > 0 && g.spacing.sy > 0 && g.spacing.sz > 0, ErrorCode::kInvalidArgument,
          "spacing must be strictly positive");
}

}  // namespace

void validate(const Volume& v) {
  validate_grid(v.info);
  require(v.voxels.size() == v.info.dims.count(), ErrorCode::kInvalidArgument,
          "voxel count does not match dims");
}

void validate(const Mask& m) {
  validate_grid(m.info);
  require(m.labels.size() == m.info.dims.count(), ErrorCode::kInvalidArgument,
          "label count does not match dims");
  require(std::all_of(m.labels.begin(), m.labels.end(), [](auto l) { return l <= 1; }),
          ErrorCode::kInvalidArgument, "mask labels must be binary");
}

void validate_pair(const Volume& v, const Mask& m) {
  validate(v);
  validate(m);
  require(v.info.same_grid(m.info), ErrorCode::kInvalidArgument,
          "volume and mask grids differ");
}

Volume normalize_intensity(const Volume& v) {
  Volume out = v;
  if (v.voxels.empty()) return out;
  auto [lo_it, hi_it] = std::minmax_element(v.voxels.begin(), v.voxels.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi == lo) {
    std::fill(out.voxels.begin(), out.voxels.end(), 0.0f);
    return out;
  }
  const double range = hi - lo;
  for (auto& x : out.voxels) {
    x = static_cast<float>(std::clamp((static_cast<double>(x) - lo) / range, 0.0, 1.0));
  }
  return out;
}

}  // namespace plexfed
