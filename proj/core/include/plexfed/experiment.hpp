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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plexfed/merge.hpp"
#include "plexfed/phantom.hpp"
#include "plexfed/pipeline.hpp"

namespace plexfed {

struct DomainCohort {
  DomainSpec spec;
  std::size_t train_count = 10;
  std::size_t test_count = 10;
};

// Adds one subject with amplified noise to a domain's cohort before QC.
struct OutlierInjection {
  std::string domain_id;
  double noise_scale = 25.0;
};

struct FederationSettings {
  std::string address = "127.0.0.1:8750";  // serve binds here; in-process run-il picks a free port
  std::optional<std::filesystem::path> registry_dir;  // defaults to <output>/registry
  std::vector<std::string> api_keys{"plexfed-dev-key"};
  std::string client_api_key = "plexfed-dev-key";
  int retries = 3;
  double corruption_rate = 0.0;
};

struct ExperimentConfig {
  std::filesystem::path output_dir = "plexfed_out";
  std::uint64_t data_seed = 1;
  std::uint64_t train_seed = 2;
  std::vector<DomainCohort> domains;  // domains[0] trains Model 0; domains[1] is the reference domain
  IterationBudgets budgets{};
  bool augment = true;
  unsigned workers = 1;
  AdamWConfig optimizer = training_optimizer();
  LossWeights loss{};
  MergePolicy merge{};
  std::size_t general_k = 10;
  double qc_z_threshold = 3.0;
  std::vector<OutlierInjection> inject_outliers;
  FederationSettings federation{};

  void validate() const;
  const DomainCohort& domain(std::string_view id) const;
  std::filesystem::path registry_dir() const;
  std::filesystem::path bundles_dir() const { return output_dir / "bundles"; }
  std::filesystem::path reports_dir() const { return output_dir / "reports"; }
  std::filesystem::path data_dir() const { return output_dir / "data"; }
  std::filesystem::path manifest_path() const { return output_dir / "manifest.json"; }
};

// Five domains with the desk-scale cohort sizes: D0 20+10, D1 10+9, D2..D4 10+30.
ExperimentConfig default_experiment_config();

ExperimentConfig parse_experiment_config(std::string_view json_text);
std::string experiment_config_json(const ExperimentConfig& cfg);

// Reads a JSON file (relative output_dir resolves against the file's directory)
// and applies PLEXFED_OUTPUT_DIR, PLEXFED_ADDR, PLEXFED_REGISTRY_DIR, PLEXFED_API_KEY.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void apply_environment_overrides(ExperimentConfig& cfg);

}  // namespace plexfed
