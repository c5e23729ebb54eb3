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
#include <string>
#include <utility>

#include "plexfed/volume.hpp"

namespace plexfed {

// One synthetic acquisition domain ("scanner/cohort").
struct DomainSpec {
  std::string domain_id = "D0";
  double gamma = 1.0;           // intensity transfer exponent, > 0
  double bias_amplitude = 0.0;  // multiplicative low-order field strength, >= 0
  double noise_sigma = 0.0;     // additive Gaussian std, >= 0
  double blur_fwhm_mm = 0.0;    // Gaussian PSF width, >= 0
  double plexus_contrast = 0.8;  // plexus minus ventricle intensity, in (0, 1]
  std::size_t plexus_min_voxels = 30;
  std::size_t plexus_max_voxels = 80;
  Dims dims{24, 24, 24};
  Spacing spacing{1.0, 1.0, 1.0};

  // Throws kInvalidArgument on any violated invariant.
  void validate() const;
};

// Clean-image intensity levels before the domain transfer is applied.
inline constexpr double kTissueLevel = 0.45;
inline constexpr double kVentricleLevel = 0.1;
inline constexpr int kMinPhantomAxis = 16;

// Deterministic in (domain, subject_seed). The volume is not normalized.
LabeledVolume generate_phantom(const DomainSpec& domain, std::uint64_t subject_seed);

}  // namespace plexfed
