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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "plexfed/volume.hpp"

namespace plexfed {

struct DiceResult {
  double value = 0.0;
  bool empty_pair = false;  // both masks empty; value is 1.0 by convention
};

// 2|P & G| / (|P| + |G|) over foreground voxels. Throws on grid mismatch.
DiceResult dice_score(const Mask& pred, const Mask& gt);
inline double dice(const Mask& pred, const Mask& gt) { return dice_score(pred, gt).value; }

// Foreground count times voxel volume.
double volume_mm3(const Mask& m);

// Linear interpolation between order statistics, h = (n - 1) p.
double quantile(std::vector<double> values, double p);

struct MedianIqr {
  double median = 0.0;
  double iqr = 0.0;
};
// Throws kInvalidArgument on an empty list.
MedianIqr median_iqr(std::vector<double> values);

struct SubjectScore {
  std::string subject_id;
  double dice = 0.0;
};

// Per dataset: sort by Dice and take the ranks nearest to k evenly spaced
// quantiles in [0.25, 0.75]; rank collisions step to the next unused rank
// (upward first, then downward). Datasets with at most k subjects are taken
// whole; fewer than k - 1 subjects is an error.
std::map<std::string, std::vector<std::string>> general_sample(
    const std::map<std::string, std::vector<SubjectScore>>& per_dataset, std::size_t k = 10);

// Sorted-Dice ranks chosen for one dataset of size n.
std::vector<std::size_t> general_sample_ranks(std::size_t n, std::size_t k);

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_variance = 0.0;  // SSE / (n - 2); zero when n == 2
  std::size_t n = 0;
  std::vector<double> eval_x;
  std::vector<double> band_half_width;  // 95% CI of the mean response at eval_x
};

// Ordinary least squares of `response` on `regressor`. The band is evaluated
// at the regressor values. Throws for n < 2 or zero regressor variance.
RegressionFit ols_fit(const std::vector<double>& response, const std::vector<double>& regressor);

struct MetricsRow {
  std::string model_id;
  std::string dataset_id;
  std::string subject_id;
  double dice = 0.0;
  double pred_vol_mm3 = 0.0;
  double gt_vol_mm3 = 0.0;
};

struct AggregateCell {
  std::string model_id;
  std::string dataset_id;
  std::size_t n = 0;
  double median_dice = 0.0;
  double iqr_dice = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;

  // One cell per (model, dataset) in sorted order.
  std::vector<AggregateCell> aggregate() const;
  std::string rows_csv() const;
  static std::string aggregate_csv(const std::vector<AggregateCell>& cells);
  static MetricsReport from_csv(const std::string& text);
};

std::string format_double(double v);

}  // namespace plexfed
