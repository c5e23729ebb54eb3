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

#include "plexfed/features.hpp"

#include <algorithm>
#include <cmath>

#include "plexfed/error.hpp"

namespace plexfed {

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::kIntensity: return "intensity";
    case Feature::kLocalMean: return "local_mean";
    case Feature::kLocalStd: return "local_std";
    case Feature::kGradientMagnitude: return "gradient_magnitude";
    case Feature::kCoordX: return "coord_x";
    case Feature::kCoordY: return "coord_y";
    case Feature::kCoordZ: return "coord_z";
  }
  return "unknown";
}

Feature feature_from_string(std::string_view name) {
  for (Feature f : {Feature::kIntensity, Feature::kLocalMean, Feature::kLocalStd, Feature::kGradientMagnitude,
                    Feature::kCoordX, Feature::kCoordY, Feature::kCoordZ}) {
    if (to_string(f) == name) return f;
  }
  fail(ErrorCode::kFormat, "unknown feature '" + std::string(name) + "'");
}

void FeatureConfig::validate() const {
  require(!features.empty(), ErrorCode::kInvalidArgument, "feature set must be non-empty");
  require(radius >= 1, ErrorCode::kInvalidArgument, "window radius must be positive");
}

namespace {

// Clamped box sum of width 2r+1 along one axis.
void box_sum_axis(const std::vector<double>& in, std::vector<double>& out, const Dims& d, int axis, int r) {
  const int n = d.axis(axis);
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(d.nx) : static_cast<std::size_t>(d.nx) * d.ny);
  const int o1 = axis == 0 ? 1 : 0;
  const int o2 = axis == 2 ? 1 : 2;
  std::vector<double> line(static_cast<std::size_t>(n) + 2 * r);
  for (int b = 0; b < d.axis(o2); ++b)
    for (int a = 0; a < d.axis(o1); ++a) {
      int p[3] = {0, 0, 0};
      p[o1] = a;
      p[o2] = b;
      const std::size_t base = d.index(p[0], p[1], p[2]);
      for (int i = -r; i < n + r; ++i) line[i + r] = in[base + stride * std::clamp(i, 0, n - 1)];
      double acc = 0.0;
      for (int i = 0; i < 2 * r + 1; ++i) acc += line[i];
      for (int i = 0; i < n; ++i) {
        out[base + stride * i] = acc;
        if (i + 1 < n) acc += line[i + 2 * r + 1] - line[i];
      }
    }
}

std::vector<double> box_sum(std::vector<double> field, const Dims& d, int r) {
  std::vector<double> tmp(field.size());
  for (int axis = 0; axis < 3; ++axis) {
    box_sum_axis(field, tmp, d, axis, r);
    field.swap(tmp);
  }
  return field;
}

}  // namespace

FeatureMap extract_features(const Volume& v, const FeatureConfig& cfg) {
  validate(v);
  cfg.validate();
  const Dims d = v.dims();
  const std::size_t n = v.size();
  FeatureMap map;
  map.voxels = n;
  map.width = cfg.features.size();
  map.values.assign(n * map.width, 0.0);

  const bool need_mean = std::count(cfg.features.begin(), cfg.features.end(), Feature::kLocalMean) > 0;
  const bool need_std = std::count(cfg.features.begin(), cfg.features.end(), Feature::kLocalStd) > 0;
  std::vector<double> local_mean, local_std;
  if (need_mean || need_std) {
    // Centering on a global reference keeps a flat window's variance exactly zero.
    const double ref = v.voxels[0];
    std::vector<double> centered(n), squared(n);
    for (std::size_t i = 0; i < n; ++i) {
      centered[i] = static_cast<double>(v.voxels[i]) - ref;
      squared[i] = centered[i] * centered[i];
    }
    const double count = std::pow(2.0 * cfg.radius + 1.0, 3.0);
    auto sum = box_sum(std::move(centered), d, cfg.radius);
    auto sum_sq = box_sum(std::move(squared), d, cfg.radius);
    local_mean.resize(n);
    local_std.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double m = sum[i] / count;
      local_mean[i] = m + ref;
      local_std[i] = std::sqrt(std::max(0.0, sum_sq[i] / count - m * m));
    }
  }

  const double sx = d.nx > 1 ? 1.0 / (d.nx - 1) : 0.0;
  const double sy = d.ny > 1 ? 1.0 / (d.ny - 1) : 0.0;
  const double sz = d.nz > 1 ? 1.0 / (d.nz - 1) : 0.0;
  const std::size_t w = map.width;
  const std::size_t stride_y = static_cast<std::size_t>(d.nx);
  const std::size_t stride_z = stride_y * d.ny;
  const float* src = v.voxels.data();
  for (std::size_t k = 0; k < w; ++k) {
    double* col = map.values.data() + k;
    switch (cfg.features[k]) {
      case Feature::kIntensity:
        for (std::size_t i = 0; i < n; ++i) col[i * w] = src[i];
        break;
      case Feature::kLocalMean:
        for (std::size_t i = 0; i < n; ++i) col[i * w] = local_mean[i];
        break;
      case Feature::kLocalStd:
        for (std::size_t i = 0; i < n; ++i) col[i * w] = local_std[i];
        break;
      case Feature::kGradientMagnitude:
        for (int z = 0; z < d.nz; ++z) {
          const std::size_t zm = (z > 0 ? z - 1 : 0) * stride_z, zp = std::min(z + 1, d.nz - 1) * stride_z;
          for (int y = 0; y < d.ny; ++y) {
            const std::size_t ym = (y > 0 ? y - 1 : 0) * stride_y, yp = std::min(y + 1, d.ny - 1) * stride_y;
            const std::size_t zo = z * stride_z, yo = y * stride_y;
            for (int x = 0; x < d.nx; ++x) {
              const std::size_t xm = x > 0 ? x - 1 : 0, xp = std::min(x + 1, d.nx - 1);
              const double gx = 0.5 * (src[zo + yo + xp] - src[zo + yo + xm]);
              const double gy = 0.5 * (src[zo + yp + x] - src[zo + ym + x]);
              const double gz = 0.5 * (src[zp + yo + x] - src[zm + yo + x]);
              col[(zo + yo + x) * w] = std::sqrt(gx * gx + gy * gy + gz * gz);
            }
          }
        }
        break;
      case Feature::kCoordX:
      case Feature::kCoordY:
      case Feature::kCoordZ: {
        const int axis = static_cast<int>(cfg.features[k]) - static_cast<int>(Feature::kCoordX);
        const double scale = axis == 0 ? sx : (axis == 1 ? sy : sz);
        std::size_t i = 0;
        for (int z = 0; z < d.nz; ++z)
          for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x, ++i) {
              const int c = axis == 0 ? x : (axis == 1 ? y : z);
              col[i * w] = c * scale;
            }
        break;
      }
    }
  }
  return map;
}

std::vector<FeatureConfig> default_config_pool() {
  using F = Feature;
  const std::vector<F> all = {F::kIntensity, F::kLocalMean, F::kLocalStd, F::kGradientMagnitude,
                              F::kCoordX,    F::kCoordY,    F::kCoordZ};
  return {
      {"rich_a", all, 2},
      {"rich_b", {F::kIntensity, F::kLocalStd, F::kLocalMean, F::kGradientMagnitude, F::kCoordZ, F::kCoordY, F::kCoordX}, 2},
      {"mid_a", {F::kIntensity, F::kLocalMean, F::kLocalStd, F::kGradientMagnitude, F::kCoordX}, 1},
      {"mid_b", {F::kIntensity, F::kLocalMean, F::kLocalStd, F::kCoordY, F::kCoordZ}, 1},
      {"compact", {F::kIntensity, F::kLocalMean, F::kLocalStd, F::kGradientMagnitude}, 1},
  };
}

}  // namespace plexfed
