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

// Command-line driver for the synthetic choroid-plexus federation experiment.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "plexfed/error.hpp"
#include "plexfed/experiment.hpp"
#include "plexfed/harness.hpp"

namespace {

int emit_error(const std::string& code, const std::string& message, int exit_code) {
  nlohmann::json j = {{"error", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return exit_code;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

nlohmann::json cells_json(const std::vector<plexfed::AggregateCell>& cells) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : cells)
    out.push_back({{"model", c.model_id}, {"dataset", c.dataset_id}, {"n", c.n}, {"median", c.median_dice},
                   {"iqr", c.iqr_dice}});
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace plexfed;
  CLI::App app{"plexfed: federated incremental learning on synthetic choroid-plexus phantoms"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  std::string server_address;
  std::string bundle_path, dataset;
  long restart_after = -1;

  auto* gen = app.add_subcommand("gen-data", "generate phantom cohorts, run QC and write the manifest");
  gen->add_option("--config", config_path, "experiment config JSON")->required();
  gen->add_flag("--force", force, "overwrite existing data");

  auto* ft = app.add_subcommand("run-ft", "train Model 0, FT1..FTn and FTall, then evaluate them");
  ft->add_option("--config", config_path, "experiment config JSON")->required();

  auto* serve = app.add_subcommand("serve", "run the federation server seeded with Model 0");
  serve->add_option("--config", config_path, "experiment config JSON")->required();

  auto* il = app.add_subcommand("run-il", "run the sequential incremental-learning rounds");
  il->add_option("--config", config_path, "experiment config JSON")->required();
  il->add_option("--server", server_address, "address of a running server (default: in-process server)");
  il->add_option("--restart-after", restart_after, "reload the in-process registry after this round");

  auto* report = app.add_subcommand("report", "write the aggregate, General and volume-fit CSVs");
  report->add_option("--config", config_path, "experiment config JSON")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a bundle on a dataset");
  eval->add_option("--bundle", bundle_path, "bundle file (.pfb)")->required();
  eval->add_option("--dataset", dataset, "directory of *_image.vol/*_mask.vol pairs, or a domain id")->required();
  eval->add_option("--config", config_path, "experiment config JSON (needed for domain ids)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return emit_error("usage", e.what(), 2);
  }

  try {
    if (*gen) {
      const auto cfg = load_experiment_config(config_path);
      const Manifest m = cmd_gen_data(cfg, force);
      nlohmann::json doms = nlohmann::json::array();
      for (const auto& d : m.domains)
        doms.push_back({{"domain", d.domain_id},
                        {"train", d.split(Split::kTrain).size()},
                        {"test", d.split(Split::kTest).size()},
                        {"qc_excluded", d.excluded.size()}});
      print_json({{"manifest", cfg.manifest_path().string()}, {"domains", doms}});
    } else if (*ft) {
      const auto cfg = load_experiment_config(config_path);
      const auto r = cmd_run_ft_arm(cfg);
      nlohmann::json models = nlohmann::json::array();
      for (const auto& [id, b] : r.models) models.push_back(id);
      print_json({{"models", models}, {"rows", r.evaluation.rows.size()}});
    } else if (*serve) {
      const auto cfg = load_experiment_config(config_path);
      auto server = make_server(cfg);
      const auto head = server->head(std::string(kRegion));
      std::cerr << nlohmann::json{{"listening", cfg.federation.address}, {"head_version", head.version}}.dump()
                << std::endl;
      server->listen();
    } else if (*il) {
      const auto cfg = load_experiment_config(config_path);
      IlArmOptions opts;
      if (!server_address.empty()) opts.server_address = server_address;
      if (restart_after >= 0) opts.restart_after_round = static_cast<std::size_t>(restart_after);
      const auto r = cmd_run_il_arm(cfg, opts);
      nlohmann::json rounds = nlohmann::json::array();
      for (const auto& rr : r.rounds)
        rounds.push_back({{"round", rr.round},
                          {"domain", rr.domain_id},
                          {"status", std::string(to_string(rr.outcome.status))},
                          {"base_version", rr.base_version},
                          {"head_version", rr.head_version}});
      print_json({{"rounds", rounds}});
    } else if (*report) {
      const auto cfg = load_experiment_config(config_path);
      const auto r = cmd_report(cfg);
      nlohmann::json files = nlohmann::json::array();
      for (const auto& [name, text] : r.files) files.push_back((cfg.reports_dir() / name).string());
      print_json({{"files", files}, {"ft_table", cells_json(r.ft_table)}, {"il_table", cells_json(r.il_table)}});
    } else if (*eval) {
      std::optional<ExperimentConfig> cfg;
      if (!config_path.empty()) cfg = load_experiment_config(config_path);
      std::cout << cmd_eval(bundle_path, dataset, cfg).to_json();
    }
  } catch (const Error& e) {
    return emit_error(std::string(to_string(e.code())), e.what(), 1);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
  return 0;
}
