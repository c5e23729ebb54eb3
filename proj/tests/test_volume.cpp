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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "plexfed/augment.hpp"
#include "plexfed/error.hpp"
#include "plexfed/phantom.hpp"
#include "plexfed/qc.hpp"
#include "plexfed/vol_io.hpp"
#include "support.hpp"

namespace plexfed {
namespace {

using testing::grid;

double voxel_std(const Volume& v) {
  double mean = 0.0;
  for (float x : v.voxels) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (float x : v.voxels) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

template <typename F>
ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected plexfed::Error";
  return ErrorCode::kInvalidArgument;
}

TEST(Phantom, DeterministicForDomainAndSeed) {
  DomainSpec spec;
  spec.noise_sigma = 0.05;
  spec.bias_amplitude = 0.2;
  spec.blur_fwhm_mm = 1.0;
  const auto a = generate_phantom(spec, 42);
  const auto b = generate_phantom(spec, 42);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  const auto c = generate_phantom(spec, 43);
  EXPECT_NE(a.image.voxels, c.image.voxels);
}

TEST(Phantom, ForegroundCountWithinRange) {
  DomainSpec spec;
  spec.plexus_min_voxels = 50;
  spec.plexus_max_voxels = 120;
  spec.dims = {32, 32, 32};
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto lv = generate_phantom(spec, seed);
    const auto fg = lv.mask.foreground();
    EXPECT_GE(fg, 50u) << seed;
    EXPECT_LE(fg, 120u) << seed;
  }
}

TEST(Phantom, NoiseRaisesVoxelStd) {
  DomainSpec quiet;
  DomainSpec noisy = quiet;
  noisy.noise_sigma = 0.1;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_GT(voxel_std(generate_phantom(noisy, seed).image), voxel_std(generate_phantom(quiet, seed).image));
  }
}

TEST(Phantom, PlexusSitsInsideDarkVentricle) {
  DomainSpec spec;  // no noise, bias or blur: raw levels are visible
  const auto lv = generate_phantom(spec, 7);
  double fg = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < lv.mask.size(); ++i) {
    if (lv.mask.labels[i]) {
      fg += lv.image.voxels[i];
      ++n;
    }
  }
  ASSERT_GT(n, 0u);
  EXPECT_NEAR(fg / static_cast<double>(n), kVentricleLevel + spec.plexus_contrast, 1e-6);
  const auto [lo, hi] = std::minmax_element(lv.image.voxels.begin(), lv.image.voxels.end());
  EXPECT_NEAR(*lo, kVentricleLevel, 1e-6);
  EXPECT_NEAR(*hi, kVentricleLevel + spec.plexus_contrast, 1e-6);
  EXPECT_EQ(lv.image.info.seed, std::optional<std::uint64_t>(7));
  EXPECT_TRUE(lv.image.info.same_grid(lv.mask.info));
}

TEST(Phantom, RejectsSmallDimsAndInvalidSpecs) {
  DomainSpec spec;
  spec.dims = {15, 24, 24};
  EXPECT_EQ(error_of([&] { generate_phantom(spec, 0); }), ErrorCode::kInvalidArgument);
  DomainSpec bad;
  bad.gamma = 0.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.plexus_contrast = 1.5;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.plexus_min_voxels = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.plexus_min_voxels = 90;
  bad.plexus_max_voxels = 80;
  EXPECT_THROW(bad.validate(), Error);
  bad = {};
  bad.spacing.sy = 0.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Normalize, ConstantVolumeMapsToZero) {
  Volume v(grid(2, 2, 2), 3.5f);
  const auto n = normalize_intensity(v);
  for (float x : n.voxels) EXPECT_EQ(x, 0.0f);
}

TEST(Normalize, LinearRescale) {
  Volume v(grid(3, 1, 1));
  v.voxels = {2, 4, 6};
  EXPECT_EQ(normalize_intensity(v).voxels, (std::vector<float>{0.0f, 0.5f, 1.0f}));
}

TEST(Normalize, UnitRangeIsIdentity) {
  Volume v(grid(3, 1, 1));
  v.voxels = {0.0f, 0.25f, 1.0f};
  EXPECT_EQ(normalize_intensity(v).voxels, v.voxels);
}

TEST(Normalize, RangeAndIdempotenceProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Volume v(grid(4, 3, 2));
    const double scale = rng.uniform(-50.0, 50.0);
    const double offset = rng.uniform(-10.0, 10.0);
    for (auto& x : v.voxels) x = static_cast<float>(offset + scale * rng.uniform());
    const auto n = normalize_intensity(v);
    for (float x : n.voxels) {
      EXPECT_GE(x, 0.0f);
      EXPECT_LE(x, 1.0f);
    }
    const auto [lo, hi] = std::minmax_element(v.voxels.begin(), v.voxels.end());
    const bool unit = *lo == 0.0f && *hi == 1.0f;
    EXPECT_EQ(normalize_intensity(v) == v, unit);
    // A normalized non-flat volume has min 0 and max 1, so a second pass is the identity.
    EXPECT_EQ(normalize_intensity(n), n);
  }
}

std::uint64_t find_seed(const std::function<bool(const AugmentPlan&)>& pred) {
  for (std::uint64_t s = 0; s < 100000; ++s)
    if (pred(plan_augmentation(s))) return s;
  ADD_FAILURE() << "no seed found";
  return 0;
}

TEST(Augment, NoTransformIsIdentity) {
  const auto lv = generate_phantom(DomainSpec{}, 5);
  const auto seed = find_seed([](const AugmentPlan& p) { return !p.any(); });
  const auto out = augment(lv.image, lv.mask, seed);
  EXPECT_EQ(out.image, lv.image);
  EXPECT_EQ(out.mask, lv.mask);
}

TEST(Augment, FlipOnlyPreservesForegroundAndPairing) {
  auto lv = generate_phantom(DomainSpec{}, 9);
  // Tie intensity to the label so the pairing can be checked voxel by voxel.
  for (std::size_t i = 0; i < lv.mask.size(); ++i) lv.image.voxels[i] = lv.mask.labels[i] ? 1.0f : 0.0f;
  int checked = 0;
  for (std::uint64_t s = 0; s < 20000 && checked < 5; ++s) {
    const auto plan = plan_augmentation(s);
    bool only_flip = plan.fired(Augmentation::kFlipRotate);
    for (std::size_t a = 1; a < kAugmentationCount; ++a) only_flip = only_flip && !plan.fires[a];
    if (!only_flip) continue;
    ++checked;
    const auto out = augment(lv.image, lv.mask, s);
    EXPECT_EQ(out.mask.foreground(), lv.mask.foreground());
    for (std::size_t i = 0; i < out.mask.size(); ++i)
      ASSERT_EQ(out.image.voxels[i] > 0.5f, out.mask.labels[i] == 1) << "seed " << s << " voxel " << i;
  }
  EXPECT_EQ(checked, 5);
}

TEST(Augment, PreservesGridAndBinaryMaskForAllSeeds) {
  DomainSpec spec;
  spec.noise_sigma = 0.03;
  const auto lv = generate_phantom(spec, 3);
  const auto img = normalize_intensity(lv.image);
  for (std::uint64_t s = 0; s < 60; ++s) {
    const auto out = augment(img, lv.mask, s);
    EXPECT_EQ(out.image.info, img.info);
    EXPECT_EQ(out.mask.info, lv.mask.info);
    EXPECT_EQ(out.image.size(), img.size());
    for (auto l : out.mask.labels) ASSERT_LE(l, 1);
    for (float x : out.image.voxels) ASSERT_TRUE(std::isfinite(x));
    if (!plan_augmentation(s).any_geometric()) {
      EXPECT_EQ(out.mask, lv.mask) << s;
    }
  }
  const auto a = augment(img, lv.mask, 17);
  const auto b = augment(img, lv.mask, 17);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
}

TEST(Augment, FireRatesMatchProbabilities) {
  constexpr int kTrials = 10000;
  std::array<int, kAugmentationCount> fired{};
  for (std::uint64_t s = 0; s < kTrials; ++s) {
    const auto plan = plan_augmentation(s);
    for (std::size_t a = 0; a < kAugmentationCount; ++a) fired[a] += plan.fires[a] ? 1 : 0;
  }
  for (std::size_t a = 0; a < kAugmentationCount; ++a) {
    const double rate = fired[a] / static_cast<double>(kTrials);
    const double p = kAugmentationProbability[a];
    EXPECT_LE(std::abs(rate - p), 0.1 * p) << to_string(static_cast<Augmentation>(a));
  }
  const double flip = fired[0] / static_cast<double>(kTrials);
  EXPECT_NEAR(flip, 0.15, 0.015);
}

TEST(Qc, IdenticalVolumesAreNotFlagged) {
  const auto lv = generate_phantom(DomainSpec{}, 1);
  std::vector<Volume> vs(10, lv.image);
  const auto r = qc_screen(vs);
  EXPECT_TRUE(r.flagged.empty());
  for (const auto& s : r.subjects)
    for (double z : s.z) EXPECT_EQ(z, 0.0);
}

std::vector<Volume> cohort_with_outlier() {
  DomainSpec clean;
  clean.noise_sigma = 0.02;
  std::vector<Volume> vs;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto v = generate_phantom(clean, s).image;
    v.info.subject_id = "c" + std::to_string(s);
    vs.push_back(v);
  }
  DomainSpec loud = clean;
  loud.noise_sigma = 0.2;
  auto v = generate_phantom(loud, 99).image;
  v.info.subject_id = "outlier";
  vs.push_back(v);
  return vs;
}

TEST(Qc, NoisyOutlierIsFlagged) {
  const auto r = qc_screen(cohort_with_outlier());
  EXPECT_EQ(r.flagged, std::vector<std::string>{"outlier"});
  EXPECT_TRUE(r.subjects.back().flagged);
  // Flag iff some |z| exceeds the threshold.
  for (const auto& s : r.subjects) {
    const bool any = std::any_of(s.z.begin(), s.z.end(), [&](double z) { return std::abs(z) > r.threshold; });
    EXPECT_EQ(any, s.flagged);
  }
}

TEST(Qc, InfiniteThresholdFlagsNothing) {
  EXPECT_TRUE(qc_screen(cohort_with_outlier(), std::numeric_limits<double>::infinity()).flagged.empty());
}

TEST(Qc, NeedsThreeVolumes) {
  const auto v = generate_phantom(DomainSpec{}, 1).image;
  EXPECT_EQ(error_of([&] { qc_screen({v, v}); }), ErrorCode::kInvalidArgument);
}

TEST(Qc, FlagsAreOrderInvariant) {
  auto vs = cohort_with_outlier();
  const auto base = qc_screen(vs, 2.0).flagged;
  Rng rng(4);
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(vs);
    EXPECT_EQ(qc_screen(vs, 2.0).flagged, base);
  }
}

TEST(Vol1, RoundTripIsBitExact) {
  testing::TempDir dir("vol");
  DomainSpec spec;
  spec.noise_sigma = 0.05;
  spec.spacing = {0.8, 0.9, 1.1};
  const auto lv = generate_phantom(spec, 21);
  write_volume(dir.path() / "a_image.vol", lv.image);
  write_mask(dir.path() / "a_mask.vol", lv.mask);
  EXPECT_EQ(read_volume(dir.path() / "a_image.vol"), lv.image);
  EXPECT_EQ(read_mask(dir.path() / "a_mask.vol"), lv.mask);
  EXPECT_EQ(encode_vol1(lv.image), read_file(dir.path() / "a_image.vol"));
}

TEST(Vol1, LayoutAndErrors) {
  Volume v(grid(3, 2, 1));
  v.voxels = {0, 1, 2, 3, 4, 5};
  auto bytes = encode_vol1(v);
  ASSERT_GT(bytes.size(), 4u + 2 + 4 + 24 + 32);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VOL1");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), kVol1Version);
  EXPECT_EQ(bytes.size() - 32 - 24, 10u + (bytes[6] | (bytes[7] << 8) | (bytes[8] << 16) | (bytes[9] << 24)));

  auto corrupt = bytes;
  corrupt[bytes.size() - 40] ^= 0x01;  // inside the float payload
  EXPECT_EQ(error_of([&] { decode_vol1(corrupt); }), ErrorCode::kChecksum);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(error_of([&] { decode_vol1(magic); }), ErrorCode::kFormat);

  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 10);
  EXPECT_EQ(error_of([&] { decode_vol1(truncated); }), ErrorCode::kTruncated);

  Mask m(grid(3, 3, 1));
  m.labels = {1, 0, 0, 1, 1, 0, 0, 0, 1};
  const auto mb = encode_vol1(m);
  const auto back = std::get<Mask>(decode_vol1(mb));
  EXPECT_EQ(back, m);
  // Nine bits pad to two payload bytes, LSB first.
  EXPECT_EQ(mb[mb.size() - 34], 0b00011001);
  EXPECT_EQ(mb[mb.size() - 33], 0b00000001);
}

}  // namespace
}  // namespace plexfed
