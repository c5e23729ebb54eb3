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
#include <limits>
#include <string>
#include <vector>

#include "plexfed/volume.hpp"

namespace plexfed {

// mean intensity, std, SNR proxy (mean/std over the outer voxel shell),
// gradient energy (mean squared central-difference gradient).
inline constexpr std::size_t kQcMetricCount = 4;
using QcMetrics = std::array<double, kQcMetricCount>;

QcMetrics qc_metrics(const Volume& v);

struct QcSubject {
  std::string subject_id;
  QcMetrics metrics{};
  QcMetrics z{};
  bool flagged = false;
};

struct QcReport {
  std::vector<QcSubject> subjects;  // input order
  std::vector<std::string> flagged;  // sorted
  double threshold = 3.0;
};

// Cohort z-scores per metric; zero-variance metrics score z = 0.
// Throws kInvalidArgument for fewer than three volumes.
QcReport qc_screen(const std::vector<Volume>& volumes,
                   double z_threshold = 3.0);

}  // namespace plexfed
