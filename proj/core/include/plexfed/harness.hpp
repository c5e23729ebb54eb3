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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plexfed/bundle.hpp"
#include "plexfed/experiment.hpp"
#include "plexfed/federation.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/qc.hpp"

namespace plexfed {

enum class Split { kTrain, kTest };
std::string_view to_string(Split s);

struct SubjectEntry {
  std::string subject_id;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  std::string image_file;  // relative to the output directory
  std::string mask_file;
  std::string image_sha256;
  std::string mask_sha256;
  std::size_t foreground_voxels = 0;
};

struct QcExclusion {
  std::string subject_id;
  std::uint64_t seed = 0;
  bool injected_outlier = false;
  QcMetrics z{};
};

struct DomainManifest {
  std::string domain_id;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::vector<SubjectEntry> subjects;  // train entries first, then test
  std::size_t screened = 0;            // cohort size seen by qc_screen
  std::vector<QcExclusion> excluded;
  std::vector<std::string> unassigned;  // passed QC but not needed for the splits

  std::vector<const SubjectEntry*> split(Split s) const;
};

struct Manifest {
  std::uint64_t data_seed = 0;
  double qc_z_threshold = 3.0;
  std::vector<DomainManifest> domains;

  const DomainManifest& domain(std::string_view id) const;
  std::string to_json() const;
  static Manifest from_json(std::string_view text);
};

// Model identifiers used in bundles/ and the reports.
inline constexpr std::string_view kModel0 = "Model0";
inline constexpr std::string_view kFtAll = "FTall";
std::string ft_model_id(std::size_t k);  // FT1..
std::string il_model_id(std::size_t k);  // IL1..

Manifest cmd_gen_data(const ExperimentConfig& cfg, bool force);
Manifest load_manifest(const ExperimentConfig& cfg);

// Reads one split, verifies file checksums against the manifest and normalizes intensities.
std::vector<LabeledVolume> load_split(const ExperimentConfig& cfg, const Manifest& manifest,
                                      std::string_view domain_id, Split split);

std::vector<MetricsRow> evaluate_model(const std::string& model_id, const ModelBundle& bundle,
                                       const std::string& dataset_id, const std::vector<LabeledVolume>& test_set);

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

struct FtArmResult {
  std::map<std::string, ModelBundle> models;
  MetricsReport evaluation;
};
FtArmResult cmd_run_ft_arm(const ExperimentConfig& cfg);

struct IlRoundRecord {
  std::size_t round = 0;
  std::string domain_id;
  std::string client_id;
  std::uint64_t base_version = 0;
  std::uint64_t head_version = 0;  // after the round
  std::string head_checksum_hex;
  SubmitOutcome outcome;
  std::uint64_t iterations = 0;
  double local_dice_before = 0.0;
  double local_dice_after = 0.0;
};

struct IlArmOptions {
  std::optional<std::string> server_address;     // external server; otherwise an in-process one
  std::optional<std::size_t> restart_after_round;  // in-process only: reload the registry from disk
};

struct IlArmResult {
  std::vector<IlRoundRecord> rounds;
  std::map<std::string, ModelBundle> models;
  MetricsReport evaluation;
};
IlArmResult cmd_run_il_arm(const ExperimentConfig& cfg, const IlArmOptions& options = {});

std::string il_rounds_csv(const std::vector<IlRoundRecord>& rounds);

struct ReportOutputs {
  std::vector<AggregateCell> ft_table;
  std::vector<AggregateCell> il_table;
  std::map<std::string, std::string> files;  // file name under reports/ -> contents
};
ReportOutputs cmd_report(const ExperimentConfig& cfg);

// Aggregates plus the General column for each model in `models`, in that order.
std::vector<AggregateCell> table_cells(const MetricsReport& rows, const std::vector<std::string>& models,
                                       const std::vector<std::string>& datasets, std::size_t general_k,
                                       std::map<std::string, std::map<std::string, std::vector<std::string>>>* selection);

struct EvalOutput {
  std::string model_version;
  std::string dataset;
  std::vector<MetricsRow> rows;
  MedianIqr summary;
  std::string to_json() const;
};
// `dataset` is a directory of *_image.vol / *_mask.vol pairs, or a domain id resolved via `cfg`.
EvalOutput cmd_eval(const std::filesystem::path& bundle_path, const std::string& dataset,
                    const std::optional<ExperimentConfig>& cfg);

// Server for `plexfed serve`: reloads the registry or bootstraps it with Model 0.
std::unique_ptr<FederationServer> make_server(const ExperimentConfig& cfg, int port_override = -1);

inline constexpr std::string_view kFtRowsFile = "ft_subjects.csv";
inline constexpr std::string_view kIlRowsFile = "il_subjects.csv";
inline constexpr std::string_view kIlRoundsFile = "il_rounds.csv";

}  // namespace plexfed
