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

#include "plexfed/qc.hpp"

#include <algorithm>
#include <cmath>

#include "plexfed/error.hpp"

namespace plexfed {

QcMetrics qc_metrics(const Volume& v) {
  validate(v);
  const Dims d = v.dims();
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (float x : v.voxels) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (float x : v.voxels) ss += (x - mean) * (x - mean);
  const double stdev = std::sqrt(ss / n);

  double shell_sum = 0.0, shell_n = 0.0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) {
          shell_sum += v.at(x, y, z);
          shell_n += 1.0;
        }
      }
  const double shell_mean = shell_sum / shell_n;
  double shell_ss = 0.0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) {
          const double dv = v.at(x, y, z) - shell_mean;
          shell_ss += dv * dv;
        }
      }
  const double shell_std = std::sqrt(shell_ss / shell_n);
  const double snr = shell_std > 0 ? shell_mean / shell_std : 0.0;

  double grad = 0.0;
  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const double gx = 0.5 * (v.at(std::min(x + 1, d.nx - 1), y, z) - v.at(std::max(x - 1, 0), y, z));
        const double gy = 0.5 * (v.at(x, std::min(y + 1, d.ny - 1), z) - v.at(x, std::max(y - 1, 0), z));
        const double gz = 0.5 * (v.at(x, y, std::min(z + 1, d.nz - 1)) - v.at(x, y, std::max(z - 1, 0)));
        grad += gx * gx + gy * gy + gz * gz;
      }
  return {mean, stdev, snr, grad / n};
}

QcReport qc_screen(const std::vector<Volume>& volumes, double z_threshold) {
  require(volumes.size() >= 3, ErrorCode::kInvalidArgument, "qc_screen needs at least 3 volumes");
  QcReport report;
  report.threshold = z_threshold;
  report.subjects.reserve(volumes.size());
  for (const auto& v : volumes) report.subjects.push_back({v.info.subject_id, qc_metrics(v), {}, false});

  const double n = static_cast<double>(volumes.size());
  for (std::size_t k = 0; k < kQcMetricCount; ++k) {
    // Sorted accumulation keeps the cohort statistics independent of input order.
    std::vector<double> values;
    for (const auto& s : report.subjects) values.push_back(s.metrics[k]);
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double x : values) sum += x;
    const double mean = sum / n;
    std::vector<double> dev;
    for (double x : values) dev.push_back((x - mean) * (x - mean));
    std::sort(dev.begin(), dev.end());
    double ss = 0.0;
    for (double x : dev) ss += x;
    const double sd = values.front() == values.back() ? 0.0 : std::sqrt(ss / n);
    for (auto& s : report.subjects) s.z[k] = sd > 0 ? (s.metrics[k] - mean) / sd : 0.0;
  }
  for (auto& s : report.subjects) {
    s.flagged = std::any_of(s.z.begin(), s.z.end(), [&](double z) { return std::abs(z) > z_threshold; });
    if (s.flagged) report.flagged.push_back(s.subject_id);
  }
  std::sort(report.flagged.begin(), report.flagged.end());
  return report;
}

}  // namespace plexfed
