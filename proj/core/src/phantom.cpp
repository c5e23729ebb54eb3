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

#include "plexfed/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "plexfed/error.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

void DomainSpec::validate() const {
  require(gamma > 0 && std::isfinite(gamma), ErrorCode::kInvalidArgument, "gamma must be > 0");
  require(bias_amplitude >= 0, ErrorCode::kInvalidArgument, "bias_amplitude must be >= 0");
  require(noise_sigma >= 0, ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  require(blur_fwhm_mm >= 0, ErrorCode::kInvalidArgument, "blur_fwhm_mm must be >= 0");
  require(plexus_contrast > 0 && plexus_contrast <= 1, ErrorCode::kInvalidArgument,
          "plexus_contrast must be in (0, 1]");
  require(spacing.sx > 0 && spacing.sy > 0 && spacing.sz > 0, ErrorCode::kInvalidArgument,
          "spacing must be strictly positive");
  require(dims.nx > 0 && dims.ny > 0 && dims.nz > 0, ErrorCode::kInvalidArgument,
          "dims must be positive");
  require(plexus_min_voxels >= 1 && plexus_min_voxels <= plexus_max_voxels &&
              plexus_max_voxels <= dims.count(),
          ErrorCode::kInvalidArgument, "plexus_voxels_range must satisfy 1 <= min <= max <= voxels");
}

namespace {

struct Ellipsoid {
  std::array<double, 3> center;  // voxel coordinates
  std::array<double, 3> radii;   // voxel units

  bool contains(int x, int y, int z) const {
    const double dx = (x - center[0]) / radii[0];
    const double dy = (y - center[1]) / radii[1];
    const double dz = (z - center[2]) / radii[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
  }
};

// Seeded frontier growth inside `allowed`, producing an irregular connected blob.
std::vector<std::size_t> grow_blob(const Dims& dims, const std::vector<std::uint8_t>& allowed,
                                   std::size_t start, std::size_t target, Rng& rng) {
  std::vector<std::uint8_t> taken(dims.count(), 0);
  std::vector<std::size_t> blob{start};
  std::vector<std::size_t> frontier;
  taken[start] = 1;
  auto push_neighbors = [&](std::size_t idx) {
    const int x = static_cast<int>(idx % dims.nx);
    const int y = static_cast<int>((idx / dims.nx) % dims.ny);
    const int z = static_cast<int>(idx / (static_cast<std::size_t>(dims.nx) * dims.ny));
    constexpr int kOff[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (const auto& o : kOff) {
      const int xx = x + o[0], yy = y + o[1], zz = z + o[2];
      if (xx < 0 || yy < 0 || zz < 0 || xx >= dims.nx || yy >= dims.ny || zz >= dims.nz) continue;
      const std::size_t n = dims.index(xx, yy, zz);
      if (allowed[n] && !taken[n]) {
        taken[n] = 2;  // queued
        frontier.push_back(n);
      }
    }
  };
  push_neighbors(start);
  while (blob.size() < target) {
    require(!frontier.empty(), ErrorCode::kInvalidArgument,
            "ventricle too small for the configured plexus size");
    const std::size_t pick = static_cast<std::size_t>(rng.below(frontier.size()));
    const std::size_t idx = frontier[pick];
    frontier[pick] = frontier.back();
    frontier.pop_back();
    taken[idx] = 1;
    blob.push_back(idx);
    push_neighbors(idx);
  }
  return blob;
}

std::vector<double> gaussian_kernel(double sigma_vox) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma_vox * sigma_vox));
    total += k[i + radius];
  }
  for (auto& w : k) w /= total;
  return k;
}

void blur_axis(std::vector<double>& field, const Dims& dims, int axis, const std::vector<double>& k) {
  const int radius = static_cast<int>(k.size() / 2);
  const int n = dims.axis(axis);
  std::vector<double> out(field.size());
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const int pos[3] = {x, y, z};
        double acc = 0.0;
        for (int d = -radius; d <= radius; ++d) {
          int p[3] = {x, y, z};
          p[axis] = std::clamp(pos[axis] + d, 0, n - 1);
          acc += k[d + radius] * field[dims.index(p[0], p[1], p[2])];
        }
        out[dims.index(x, y, z)] = acc;
      }
  field.swap(out);
}

}  // namespace

LabeledVolume generate_phantom(const DomainSpec& domain, std::uint64_t subject_seed) {
  domain.validate();
  const Dims& dims = domain.dims;
  require(dims.nx >= kMinPhantomAxis && dims.ny >= kMinPhantomAxis && dims.nz >= kMinPhantomAxis,
          ErrorCode::kInvalidArgument, "phantom dims must be at least 16 per axis");

  Rng geometry(derive_seed(subject_seed, {1}));
  Rng texture_rng(derive_seed(subject_seed, {2}));
  Rng bias_rng(derive_seed(subject_seed, {3}));
  Rng noise_rng(derive_seed(subject_seed, {4}));

  const double ex = dims.nx - 1, ey = dims.ny - 1, ez = dims.nz - 1;
  auto jitter = [&](double amount) { return geometry.uniform(-amount, amount); };

  // One ventricle per hemisphere, mirrored about the mid-sagittal plane.
  std::array<Ellipsoid, 2> ventricles;
  const double cy = 0.5 + jitter(0.03), cz = 0.5 + jitter(0.03);
  const double offset = 0.17 + jitter(0.015);
  for (int h = 0; h < 2; ++h) {
    const double scale = 1.0 + jitter(0.08);
    ventricles[h].center = {(0.5 + (h == 0 ? -offset : offset)) * ex, (cy + jitter(0.01)) * ey,
                            (cz + jitter(0.01)) * ez};
    ventricles[h].radii = {0.09 * ex * scale + 0.5, 0.22 * ey * scale + 0.5, 0.12 * ez * scale + 0.5};
  }

  const std::size_t total = static_cast<std::size_t>(geometry.between(
      static_cast<std::int64_t>(domain.plexus_min_voxels), static_cast<std::int64_t>(domain.plexus_max_voxels)));
  const std::size_t left = total / 2;
  const std::size_t targets[2] = {left, total - left};

  GridInfo info{dims, domain.spacing, domain.domain_id,
                domain.domain_id + "_" + std::to_string(subject_seed), subject_seed};
  Mask mask(info);
  std::vector<std::uint8_t> ventricle_any(dims.count(), 0);
  for (int h = 0; h < 2; ++h) {
    std::vector<std::uint8_t> inside(dims.count(), 0);
    std::vector<std::size_t> interior;
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x)
          if (ventricles[h].contains(x, y, z)) {
            const auto i = dims.index(x, y, z);
            inside[i] = 1;
            ventricle_any[i] = 1;
            interior.push_back(i);
          }
    if (targets[h] == 0) continue;
    require(interior.size() >= targets[h], ErrorCode::kInvalidArgument,
            "ventricle too small for the configured plexus size");
    // Anchor the plexus toward the lower-lateral part of the ventricle.
    const auto& c = ventricles[h].center;
    const auto& r = ventricles[h].radii;
    const int sx = static_cast<int>(std::lround(c[0] + (h == 0 ? -0.3 : 0.3) * r[0]));
    const int sy = static_cast<int>(std::lround(c[1] + jitter(0.3) * r[1]));
    const int sz = static_cast<int>(std::lround(c[2] - 0.2 * r[2]));
    std::size_t start = dims.index(std::clamp(sx, 0, dims.nx - 1), std::clamp(sy, 0, dims.ny - 1),
                                   std::clamp(sz, 0, dims.nz - 1));
    if (!inside[start]) start = interior[interior.size() / 2];
    for (auto idx : grow_blob(dims, inside, start, targets[h], geometry)) mask.labels[idx] = 1;
  }

  // Clean intensities with a smooth tissue texture.
  std::array<double, 9> tex{};
  for (auto& t : tex) t = texture_rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> field(dims.count());
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x) {
        const double u = x / ex, v = y / ey, w = z / ez;
        const auto i = dims.index(x, y, z);
        double value;
        if (mask.labels[i]) {
          value = kVentricleLevel + domain.plexus_contrast;
        } else if (ventricle_any[i]) {
          value = kVentricleLevel;
        } else {
          value = kTissueLevel + 0.03 * std::sin(2 * std::numbers::pi * 1.5 * u + tex[0]) *
                                     std::cos(2 * std::numbers::pi * 1.2 * v + tex[1]) +
                  0.02 * std::sin(2 * std::numbers::pi * 2.0 * w + tex[2]);
        }
        field[i] = std::pow(value, domain.gamma);
      }

  if (domain.blur_fwhm_mm > 0) {
    const double sigma_mm = domain.blur_fwhm_mm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (int a = 0; a < 3; ++a) {
      const double sigma_vox = sigma_mm / domain.spacing.axis(a);
      if (sigma_vox > 1e-3) blur_axis(field, dims, a, gaussian_kernel(sigma_vox));
    }
  }

  if (domain.bias_amplitude > 0) {
    std::array<double, 6> c{};
    double norm = 0.0;
    for (auto& ci : c) {
      ci = bias_rng.uniform(-1.0, 1.0);
      norm += std::abs(ci);
    }
    for (auto& ci : c) ci /= std::max(norm, 1e-12) * 0.5;  // |b| <= 1 on the unit cube
    for (int z = 0; z < dims.nz; ++z)
      for (int y = 0; y < dims.ny; ++y)
        for (int x = 0; x < dims.nx; ++x) {
          const double u = x / ex - 0.5, v = y / ey - 0.5, w = z / ez - 0.5;
          const double b = c[0] * u + c[1] * v + c[2] * w + c[3] * u * v + c[4] * v * w + c[5] * u * w;
          field[dims.index(x, y, z)] *= 1.0 + domain.bias_amplitude * b;
        }
  }

  Volume image(info);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double noise = domain.noise_sigma > 0 ? domain.noise_sigma * noise_rng.normal() : 0.0;
    image.voxels[i] = static_cast<float>(field[i] + noise);
  }
  return {std::move(image), std::move(mask)};
}

}  // namespace plexfed
