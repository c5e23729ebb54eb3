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

#include "plexfed/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "plexfed/error.hpp"

namespace plexfed {

DiceResult dice_score(const Mask& pred, const Mask& gt) {
  require(pred.info.dims == gt.info.dims && pred.size() == gt.size(), ErrorCode::kInvalidArgument,
          "dice: mask dimensions differ");
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred.labels[i];
    g += gt.labels[i];
    inter += pred.labels[i] & gt.labels[i];
  }
  if (p + g == 0) return {1.0, true};
  return {2.0 * static_cast<double>(inter) / static_cast<double>(p + g), false};
}

double volume_mm3(const Mask& m) {
  return static_cast<double>(m.foreground()) * m.info.spacing.voxel_volume();
}

double quantile(std::vector<double> values, double p) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "quantile of an empty list");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

MedianIqr median_iqr(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kInvalidArgument, "median_iqr of an empty list");
  std::sort(values.begin(), values.end());
  const double q1 = quantile(values, 0.25);
  const double q3 = quantile(values, 0.75);
  return {quantile(values, 0.5), q3 - q1};
}

std::vector<std::size_t> general_sample_ranks(std::size_t n, std::size_t k) {
  require(k >= 1, ErrorCode::kInvalidArgument, "general_sample: k must be positive");
  require(n + 1 >= k, ErrorCode::kInvalidArgument, "general_sample: dataset smaller than k - 1");
  std::vector<std::size_t> ranks;
  if (n <= k) {
    for (std::size_t i = 0; i < n; ++i) ranks.push_back(i);
    return ranks;
  }
  std::vector<bool> used(n, false);
  for (std::size_t i = 0; i < k; ++i) {
    const double q = k == 1 ? 0.5 : 0.25 + 0.5 * static_cast<double>(i) / static_cast<double>(k - 1);
    const double h = (static_cast<double>(n) - 1.0) * q;
    auto r = static_cast<std::size_t>(std::llround(h));
    std::size_t pick = r;
    while (pick < n && used[pick]) ++pick;
    if (pick >= n) {
      pick = r;
      while (used[pick]) --pick;
    }
    used[pick] = true;
    ranks.push_back(pick);
  }
  std::sort(ranks.begin(), ranks.end());
  return ranks;
}

std::map<std::string, std::vector<std::string>> general_sample(
    const std::map<std::string, std::vector<SubjectScore>>& per_dataset, std::size_t k) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [dataset, scores] : per_dataset) {
    std::vector<SubjectScore> sorted = scores;
    std::sort(sorted.begin(), sorted.end(), [](const SubjectScore& a, const SubjectScore& b) {
      return a.dice != b.dice ? a.dice < b.dice : a.subject_id < b.subject_id;
    });
    auto& chosen = out[dataset];
    for (auto r : general_sample_ranks(sorted.size(), k)) chosen.push_back(sorted[r].subject_id);
  }
  return out;
}

RegressionFit ols_fit(const std::vector<double>& response, const std::vector<double>& regressor) {
  require(response.size() == regressor.size(), ErrorCode::kInvalidArgument, "ols_fit: length mismatch");
  const std::size_t n = response.size();
  require(n >= 2, ErrorCode::kInvalidArgument, "ols_fit needs at least two points");
  const double nn = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += regressor[i];
    my += response[i];
  }
  mx /= nn;
  my /= nn;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (regressor[i] - mx) * (regressor[i] - mx);
    sxy += (regressor[i] - mx) * (response[i] - my);
  }
  require(sxx > 0.0, ErrorCode::kInvalidArgument, "ols_fit: regressor has zero variance");
  RegressionFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = response[i] - (fit.intercept + fit.slope * regressor[i]);
    sse += r * r;
  }
  fit.eval_x = regressor;
  fit.band_half_width.assign(n, 0.0);
  if (n == 2) return fit;  // zero residual degrees of freedom
  fit.residual_variance = sse / (nn - 2.0);
  if (fit.residual_variance == 0.0) return fit;
  const boost::math::students_t dist(nn - 2.0);
  const double t = boost::math::quantile(dist, 0.975);
  const double s = std::sqrt(fit.residual_variance);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = regressor[i] - mx;
    fit.band_half_width[i] = t * s * std::sqrt(1.0 / nn + dx * dx / sxx);
  }
  return fit;
}

std::vector<AggregateCell> MetricsReport::aggregate() const {
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : rows) cells[{r.model_id, r.dataset_id}].push_back(r.dice);
  std::vector<AggregateCell> out;
  for (const auto& [key, values] : cells) {
    const auto s = median_iqr(values);
    out.push_back({key.first, key.second, values.size(), s.median, s.iqr});
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string MetricsReport::rows_csv() const {
  std::ostringstream os;
  os << "model_id,dataset_id,subject_id,dice,pred_vol_mm3,gt_vol_mm3\n";
  for (const auto& r : rows) {
    os << r.model_id << ',' << r.dataset_id << ',' << r.subject_id << ',' << format_double(r.dice) << ','
       << format_double(r.pred_vol_mm3) << ',' << format_double(r.gt_vol_mm3) << '\n';
  }
  return os.str();
}

std::string MetricsReport::aggregate_csv(const std::vector<AggregateCell>& cells) {
  std::ostringstream os;
  os << "model_id,dataset_id,n,median_dice,iqr_dice\n";
  for (const auto& c : cells) {
    os << c.model_id << ',' << c.dataset_id << ',' << c.n << ',' << format_double(c.median_dice) << ','
       << format_double(c.iqr_dice) << '\n';
  }
  return os.str();
}

MetricsReport MetricsReport::from_csv(const std::string& text) {
  MetricsReport report;
  std::istringstream is(text);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) &&
              line == "model_id,dataset_id,subject_id,dice,pred_vol_mm3,gt_vol_mm3",
          ErrorCode::kFormat, "metrics CSV header mismatch");
  auto to_double = [](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::kFormat,
            "bad number '" + s + "' in metrics CSV");
    return v;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string col;
    std::istringstream ls(line);
    while (std::getline(ls, col, ',')) cols.push_back(col);
    require(cols.size() == 6, ErrorCode::kFormat, "metrics CSV row must have 6 columns");
    report.rows.push_back({cols[0], cols[1], cols[2], to_double(cols[3]), to_double(cols[4]), to_double(cols[5])});
  }
  return report;
}

}  // namespace plexfed
