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

#include "plexfed/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "plexfed/error.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::kFlipRotate: return "flip_rotate";
    case Augmentation::kIntensityShift: return "intensity_shift";
    case Augmentation::kBiasField: return "bias_field";
    case Augmentation::kGibbs: return "gibbs";
    case Augmentation::kMotion: return "motion";
    case Augmentation::kElastic: return "elastic";
    case Augmentation::kGhost: return "ghost";
  }
  return "unknown";
}

bool AugmentPlan::any() const {
  return std::any_of(fires.begin(), fires.end(), [](bool f) { return f; });
}

AugmentPlan plan_augmentation(std::uint64_t rng_seed) {
  Rng rng(derive_seed(rng_seed, {0}));
  AugmentPlan plan;
  for (std::size_t i = 0; i < kAugmentationCount; ++i) {
    plan.fires[i] = rng.bernoulli(kAugmentationProbability[i]);
  }
  return plan;
}

namespace {

struct Coord {
  int p[3];
};

// Applies a voxel permutation given as a destination -> source coordinate map.
template <typename Fn>
void remap(LabeledVolume& lv, Fn source_of) {
  const Dims& d = lv.image.dims();
  std::vector<float> vox(lv.image.voxels.size());
  std::vector<std::uint8_t> lab(lv.mask.labels.size());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const Coord s = source_of(Coord{{x, y, z}});
        const auto dst = d.index(x, y, z);
        const auto src = d.index(s.p[0], s.p[1], s.p[2]);
        vox[dst] = lv.image.voxels[src];
        lab[dst] = lv.mask.labels[src];
      }
  lv.image.voxels.swap(vox);
  lv.mask.labels.swap(lab);
}

void flip_rotate(LabeledVolume& lv, Rng& rng) {
  const Dims d = lv.image.dims();
  const Spacing s = lv.image.info.spacing;
  if (rng.bernoulli(0.5)) {
    const int axis = static_cast<int>(rng.below(3));
    const int n = d.axis(axis);
    remap(lv, [&](Coord c) {
      c.p[axis] = n - 1 - c.p[axis];
      return c;
    });
    return;
  }
  const int plane = static_cast<int>(rng.below(3));
  const int a = plane == 2 ? 1 : 0;
  const int b = plane == 0 ? 1 : 2;
  int k = static_cast<int>(rng.between(1, 3));
  // Quarter turns need a square plane to keep dims; fall back to a half turn.
  if (k != 2 && (d.axis(a) != d.axis(b) || s.axis(a) != s.axis(b))) k = 2;
  const int na = d.axis(a), nb = d.axis(b);
  remap(lv, [&](Coord c) {
    const int i = c.p[a], j = c.p[b];
    if (k == 1) {
      c.p[a] = j;
      c.p[b] = nb - 1 - i;
    } else if (k == 2) {
      c.p[a] = na - 1 - i;
      c.p[b] = nb - 1 - j;
    } else {
      c.p[a] = na - 1 - j;
      c.p[b] = i;
    }
    return c;
  });
}

void elastic(LabeledVolume& lv, Rng& rng) {
  const Dims d = lv.image.dims();
  constexpr int n = kElasticControlPoints;
  std::vector<double> ctrl(3 * n * n * n);
  for (auto& c : ctrl) c = rng.uniform(-kElasticMaxDisplacement, kElasticMaxDisplacement);
  // Separable trilinear upsampling of the control grid, one axis at a time.
  auto upsample = [&](const std::vector<double>& src, int lines, int len) {
    std::vector<double> out(static_cast<std::size_t>(lines) * len);
    for (int l = 0; l < lines; ++l)
      for (int x = 0; x < len; ++x) {
        const double f = len > 1 ? x * (n - 1.0) / (len - 1.0) : 0.0;
        const int i0 = std::min(static_cast<int>(f), n - 2);
        const double t = f - i0;
        out[static_cast<std::size_t>(l) * len + x] =
            (1 - t) * src[static_cast<std::size_t>(l) * n + i0] + t * src[static_cast<std::size_t>(l) * n + i0 + 1];
      }
    return out;
  };
  // Moves the fastest axis of a (slow..., fast) array to the slowest position.
  auto rotate_axes = [](const std::vector<double>& src, int outer, int fast) {
    std::vector<double> out(src.size());
    for (int o = 0; o < outer; ++o)
      for (int f = 0; f < fast; ++f) out[static_cast<std::size_t>(f) * outer + o] = src[static_cast<std::size_t>(o) * fast + f];
    return out;
  };
  std::array<std::vector<double>, 3> disp;
  for (int comp = 0; comp < 3; ++comp) {
    std::vector<double> g(ctrl.begin() + comp * n * n * n, ctrl.begin() + (comp + 1) * n * n * n);  // [k][j][i]
    g = upsample(g, n * n, d.nx);                 // [k][j][x]
    g = rotate_axes(g, n * n, d.nx);              // [x][k][j]
    g = upsample(g, d.nx * n, d.ny);              // [x][k][y]
    g = rotate_axes(g, d.nx * n, d.ny);           // [y][x][k]
    g = upsample(g, d.ny * d.nx, d.nz);           // [y][x][z]
    g = rotate_axes(g, d.ny * d.nx, d.nz);        // [z][y][x]
    disp[comp] = std::move(g);
  }
  const Volume& in = lv.image;
  auto sample = [&](double x, double y, double z) {
    x = std::clamp(x, 0.0, d.nx - 1.0);
    y = std::clamp(y, 0.0, d.ny - 1.0);
    z = std::clamp(z, 0.0, d.nz - 1.0);
    const int x0 = std::min(static_cast<int>(x), d.nx - 2);
    const int y0 = std::min(static_cast<int>(y), d.ny - 2);
    const int z0 = std::min(static_cast<int>(z), d.nz - 2);
    const double tx = x - x0, ty = y - y0, tz = z - z0;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double wt = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
          acc += wt * in.at(x0 + dx, y0 + dy, z0 + dz);
        }
    return acc;
  };
  std::vector<float> vox(in.voxels.size());
  std::vector<std::uint8_t> lab(lv.mask.labels.size());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto dst = d.index(x, y, z);
        const double sx = x + disp[0][dst];
        const double sy = y + disp[1][dst];
        const double sz = z + disp[2][dst];
        vox[dst] = static_cast<float>(sample(sx, sy, sz));
        const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, d.nx - 1);
        const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, d.ny - 1);
        const int nz = std::clamp(static_cast<int>(std::lround(sz)), 0, d.nz - 1);
        lab[dst] = lv.mask.labels[d.index(nx, ny, nz)];
      }
  lv.image.voxels.swap(vox);
  lv.mask.labels.swap(lab);
}

void intensity_shift(Volume& v, Rng& rng) {
  const float offset = static_cast<float>(rng.uniform(-kIntensityShiftMax, kIntensityShiftMax));
  for (auto& x : v.voxels) x += offset;
}

void bias_field(Volume& v, Rng& rng) {
  const Dims d = v.dims();
  double c[9];
  for (auto& ci : c) ci = rng.uniform(-1.0, 1.0);
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const double u = x / (d.nx - 1.0) - 0.5, w = z / (d.nz - 1.0) - 0.5;
        const double t = y / (d.ny - 1.0) - 0.5;
        const double poly = c[0] * u + c[1] * t + c[2] * w + c[3] * u * u + c[4] * t * t +
                            c[5] * w * w + c[6] * u * t + c[7] * t * w + c[8] * u * w;
        v.at(x, y, z) = static_cast<float>(v.at(x, y, z) * std::exp(kBiasFieldAmplitude * poly));
      }
}

// Real operator of "DFT, drop high frequencies, inverse DFT" along one axis.
const std::vector<double>& lowpass_matrix(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const int cutoff = std::max(1, static_cast<int>(std::floor(kGibbsKeepFraction * n / 2.0)));
  std::vector<double> m(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l) {
      double acc = 1.0;
      for (int k = 1; k <= cutoff; ++k) acc += 2.0 * std::cos(2.0 * std::numbers::pi * k * (j - l) / n);
      m[static_cast<std::size_t>(j) * n + l] = acc / n;
    }
  return cache.emplace(n, std::move(m)).first->second;
}

void gibbs(Volume& v) {
  const Dims d = v.dims();
  std::vector<double> field(v.voxels.begin(), v.voxels.end());
  std::vector<double> line, out;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = d.axis(axis);
    const auto& m = lowpass_matrix(n);
    line.resize(n);
    out.resize(n);
    const int o1 = axis == 0 ? 1 : 0;
    const int o2 = axis == 2 ? 1 : 2;
    for (int b = 0; b < d.axis(o2); ++b)
      for (int a = 0; a < d.axis(o1); ++a) {
        int p[3];
        p[o1] = a;
        p[o2] = b;
        for (int i = 0; i < n; ++i) {
          p[axis] = i;
          line[i] = field[d.index(p[0], p[1], p[2])];
        }
        for (int j = 0; j < n; ++j) {
          double acc = 0.0;
          const double* row = &m[static_cast<std::size_t>(j) * n];
          for (int l = 0; l < n; ++l) acc += row[l] * line[l];
          out[j] = acc;
        }
        for (int i = 0; i < n; ++i) {
          p[axis] = i;
          field[d.index(p[0], p[1], p[2])] = out[i];
        }
      }
  }
  for (std::size_t i = 0; i < field.size(); ++i) v.voxels[i] = static_cast<float>(field[i]);
}

// (1 - weight) * v + weight * circular_shift(v, shift along axis)
void blend_shifted(Volume& v, int axis, int shift, double weight) {
  const Dims d = v.dims();
  const int n = d.axis(axis);
  std::vector<float> out(v.voxels.size());
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        int p[3] = {x, y, z};
        p[axis] = ((p[axis] - shift) % n + n) % n;
        const auto i = d.index(x, y, z);
        out[i] = static_cast<float>((1.0 - weight) * v.voxels[i] + weight * v.voxels[d.index(p[0], p[1], p[2])]);
      }
  v.voxels.swap(out);
}

void motion(Volume& v, Rng& rng) {
  const int axis = static_cast<int>(rng.below(3));
  int shift = static_cast<int>(rng.between(1, kMotionMaxShift));
  if (rng.bernoulli(0.5)) shift = -shift;
  blend_shifted(v, axis, shift, kMotionWeight);
}

void ghost(Volume& v, Rng& rng) {
  const int axis = static_cast<int>(rng.below(3));
  blend_shifted(v, axis, v.dims().axis(axis) / 2, kGhostWeight);
}

}  // namespace

LabeledVolume augment(const Volume& v, const Mask& m, std::uint64_t rng_seed) {
  validate_pair(v, m);
  const AugmentPlan plan = plan_augmentation(rng_seed);
  LabeledVolume out{v, m};
  if (!plan.any()) return out;
  auto stream = [&](Augmentation a) { return Rng(derive_seed(rng_seed, {1 + static_cast<std::uint64_t>(a)})); };

  if (plan.fired(Augmentation::kFlipRotate)) {
    auto rng = stream(Augmentation::kFlipRotate);
    flip_rotate(out, rng);
  }
  if (plan.fired(Augmentation::kElastic)) {
    auto rng = stream(Augmentation::kElastic);
    elastic(out, rng);
  }
  if (plan.fired(Augmentation::kIntensityShift)) {
    auto rng = stream(Augmentation::kIntensityShift);
    intensity_shift(out.image, rng);
  }
  if (plan.fired(Augmentation::kBiasField)) {
    auto rng = stream(Augmentation::kBiasField);
    bias_field(out.image, rng);
  }
  if (plan.fired(Augmentation::kGibbs)) gibbs(out.image);
  if (plan.fired(Augmentation::kMotion)) {
    auto rng = stream(Augmentation::kMotion);
    motion(out.image, rng);
  }
  if (plan.fired(Augmentation::kGhost)) {
    auto rng = stream(Augmentation::kGhost);
    ghost(out.image, rng);
  }
  return out;
}

}  // namespace plexfed
