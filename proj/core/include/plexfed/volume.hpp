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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace plexfed {

struct Dims {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  // x-fastest linear index.
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nx) +
           static_cast<std::size_t>(x);
  }
  int axis(int a) const { return a == 0 ? nx : (a == 1 ? ny : nz); }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double voxel_volume() const { return sx * sy * sz; }
  double axis(int a) const { return a == 0 ? sx : (a == 1 ? sy : sz); }
  bool operator==(const Spacing&) const = default;
};

// Geometry and identity shared by a paired volume and mask.
struct GridInfo {
  Dims dims;
  Spacing spacing;
  std::string dataset_id;
  std::string subject_id;
  std::optional<std::uint64_t> seed;

  bool same_grid(const GridInfo& other) const {
    return dims == other.dims && spacing == other.spacing;
  }
  bool operator==(const GridInfo&) const = default;
};

struct Volume {
  GridInfo info;
  std::vector<float> voxels;

  Volume() = default;
  explicit Volume(GridInfo grid, float fill = 0.0f)
      : info(std::move(grid)), voxels(info.dims.count(), fill) {}

  const Dims& dims() const { return info.dims; }
  std::size_t size() const { return voxels.size(); }
  float& at(int x, int y, int z) { return voxels[info.dims.index(x, y, z)]; }
  float at(int x, int y, int z) const { return voxels[info.dims.index(x, y, z)]; }
  bool operator==(const Volume&) const = default;
};

// Binary labels, one byte per voxel in memory (packed only on disk).
struct Mask {
  GridInfo info;
  std::vector<std::uint8_t> labels;

  Mask() = default;
  explicit Mask(GridInfo grid) : info(std::move(grid)), labels(info.dims.count(), 0) {}

  const Dims& dims() const { return info.dims; }
  std::size_t size() const { return labels.size(); }
  std::size_t foreground() const;
  bool operator==(const Mask&) const = default;
};

struct LabeledVolume {
  Volume image;
  Mask mask;
};

// Throws kInvalidArgument when dims/spacing are not positive or sizes disagree.
void validate(const Volume& v);
void validate(const Mask& m);
void validate_pair(const Volume& v, const Mask& m);

// (x - min) / (max - min) voxelwise; a flat volume maps to all zeros.
[[nodiscard]] Volume normalize_intensity(const Volume& v);

}  // namespace plexfed
