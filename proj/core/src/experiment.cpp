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

#include "plexfed/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plexfed/error.hpp"

namespace plexfed {

using nlohmann::json;

void ExperimentConfig::validate() const {
  require(domains.size() >= 2, ErrorCode::kInvalidArgument,
          "config needs at least two domains (initial + reference)");
  std::set<std::string> ids;
  for (const auto& d : domains) {
    d.spec.validate();
    require(ids.insert(d.spec.domain_id).second, ErrorCode::kInvalidArgument,
            "duplicate domain id '" + d.spec.domain_id + "'");
    require(d.test_count >= 1, ErrorCode::kInvalidArgument, "domain " + d.spec.domain_id + ": test_count must be >= 1");
  }
  require(domains[0].train_count >= kMinLabeledVolumes, ErrorCode::kInvalidArgument,
          "initial domain needs at least 10 training subjects");
  for (std::size_t i = 1; i < domains.size(); ++i)
    require(domains[i].train_count >= kMinLabeledVolumes, ErrorCode::kInvalidArgument,
            "domain " + domains[i].spec.domain_id + " needs at least 10 training subjects");
  require(general_k >= 1, ErrorCode::kInvalidArgument, "general_k must be >= 1");
  require(qc_z_threshold > 0, ErrorCode::kInvalidArgument, "qc z threshold must be > 0");
  require(workers >= 1, ErrorCode::kInvalidArgument, "workers must be >= 1");
  merge.validate();
  require(!output_dir.empty(), ErrorCode::kInvalidArgument, "output_dir must be set");
  require(!federation.api_keys.empty(), ErrorCode::kInvalidArgument, "federation needs at least one API key");
  require(federation.corruption_rate >= 0 && federation.corruption_rate < 1, ErrorCode::kInvalidArgument,
          "corruption_rate must be in [0, 1)");
  for (const auto& o : inject_outliers) {
    domain(o.domain_id);
    require(o.noise_scale > 0, ErrorCode::kInvalidArgument, "outlier noise_scale must be > 0");
  }
}

const DomainCohort& ExperimentConfig::domain(std::string_view id) const {
  for (const auto& d : domains)
    if (d.spec.domain_id == id) return d;
  fail(ErrorCode::kNotFound, "unknown domain '" + std::string(id) + "'");
}

std::filesystem::path ExperimentConfig::registry_dir() const {
  return federation.registry_dir ? *federation.registry_dir : output_dir / "registry";
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  auto make = [](std::string id, std::size_t train, std::size_t test) {
    DomainCohort c;
    c.spec.domain_id = std::move(id);
    c.train_count = train;
    c.test_count = test;
    return c;
  };
  DomainCohort d0 = make("D0", 20, 10);
  d0.spec.noise_sigma = 0.02;

  DomainCohort d1 = make("D1", 10, 9);
  d1.spec.gamma = 1.8;
  d1.spec.blur_fwhm_mm = 1.2;
  d1.spec.noise_sigma = 0.03;

  DomainCohort d2 = make("D2", 10, 30);
  d2.spec.gamma = 2.5;
  d2.spec.blur_fwhm_mm = 1.5;
  d2.spec.noise_sigma = 0.03;

  DomainCohort d3 = make("D3", 10, 30);
  d3.spec.blur_fwhm_mm = 2.0;
  d3.spec.noise_sigma = 0.02;

  DomainCohort d4 = make("D4", 10, 30);
  d4.spec.blur_fwhm_mm = 1.5;
  d4.spec.plexus_contrast = 0.5;
  d4.spec.noise_sigma = 0.02;

  cfg.domains = {d0, d1, d2, d3, d4};
  return cfg;
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

json domain_to_json(const DomainCohort& c) {
  const auto& s = c.spec;
  return {{"domain_id", s.domain_id},
          {"train", c.train_count},
          {"test", c.test_count},
          {"gamma", s.gamma},
          {"bias_amplitude", s.bias_amplitude},
          {"noise_sigma", s.noise_sigma},
          {"blur_fwhm_mm", s.blur_fwhm_mm},
          {"plexus_contrast", s.plexus_contrast},
          {"plexus_voxels_range", {s.plexus_min_voxels, s.plexus_max_voxels}},
          {"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
          {"spacing_mm", {s.spacing.sx, s.spacing.sy, s.spacing.sz}}};
}

DomainCohort domain_from_json(const json& j) {
  DomainCohort c;
  auto& s = c.spec;
  s.domain_id = j.at("domain_id").get<std::string>();
  read_opt(j, "train", c.train_count);
  read_opt(j, "test", c.test_count);
  read_opt(j, "gamma", s.gamma);
  read_opt(j, "bias_amplitude", s.bias_amplitude);
  read_opt(j, "noise_sigma", s.noise_sigma);
  read_opt(j, "blur_fwhm_mm", s.blur_fwhm_mm);
  read_opt(j, "plexus_contrast", s.plexus_contrast);
  if (j.contains("plexus_voxels_range")) {
    const auto& r = j.at("plexus_voxels_range");
    require(r.is_array() && r.size() == 2, ErrorCode::kFormat, "plexus_voxels_range must be [min, max]");
    s.plexus_min_voxels = r[0].get<std::size_t>();
    s.plexus_max_voxels = r[1].get<std::size_t>();
  }
  if (j.contains("dims")) {
    const auto& d = j.at("dims");
    require(d.is_array() && d.size() == 3, ErrorCode::kFormat, "dims must be [nx, ny, nz]");
    s.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
  }
  if (j.contains("spacing_mm")) {
    const auto& d = j.at("spacing_mm");
    require(d.is_array() && d.size() == 3, ErrorCode::kFormat, "spacing_mm must be [sx, sy, sz]");
    s.spacing = {d[0].get<double>(), d[1].get<double>(), d[2].get<double>()};
  }
  return c;
}

}  // namespace

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json domains = json::array();
  for (const auto& d : cfg.domains) domains.push_back(domain_to_json(d));
  json outliers = json::array();
  for (const auto& o : cfg.inject_outliers) outliers.push_back({{"domain_id", o.domain_id}, {"noise_scale", o.noise_scale}});
  json fed = {{"address", cfg.federation.address},
              {"api_keys", cfg.federation.api_keys},
              {"client_api_key", cfg.federation.client_api_key},
              {"retries", cfg.federation.retries},
              {"corruption_rate", cfg.federation.corruption_rate}};
  if (cfg.federation.registry_dir) fed["registry_dir"] = cfg.federation.registry_dir->string();
  json j = {{"output_dir", cfg.output_dir.string()},
            {"seeds", {{"data", cfg.data_seed}, {"train", cfg.train_seed}}},
            {"domains", domains},
            {"budgets", {{"initial", cfg.budgets.initial}}},
            {"augment", cfg.augment},
            {"workers", cfg.workers},
            {"optimizer",
             {{"lr", cfg.optimizer.lr},
              {"weight_decay", cfg.optimizer.weight_decay},
              {"beta1", cfg.optimizer.beta1},
              {"beta2", cfg.optimizer.beta2},
              {"epsilon", cfg.optimizer.epsilon}}},
            {"loss", {{"lambda_dice", cfg.loss.dice}, {"lambda_ce", cfg.loss.ce}}},
            {"merge", {{"alpha", cfg.merge.alpha}, {"epsilon_gate", cfg.merge.epsilon_gate}}},
            {"general_k", cfg.general_k},
            {"qc", {{"z_threshold", cfg.qc_z_threshold}, {"inject_outliers", outliers}}},
            {"federation", fed}};
  return j.dump(2) + "\n";
}

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorCode::kFormat, "config must be a JSON object");
  ExperimentConfig cfg = default_experiment_config();
  try {
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seeds")) {
      read_opt(j.at("seeds"), "data", cfg.data_seed);
      read_opt(j.at("seeds"), "train", cfg.train_seed);
    }
    if (j.contains("domains")) {
      cfg.domains.clear();
      for (const auto& d : j.at("domains")) cfg.domains.push_back(domain_from_json(d));
    }
    if (j.contains("budgets")) read_opt(j.at("budgets"), "initial", cfg.budgets.initial);
    read_opt(j, "augment", cfg.augment);
    read_opt(j, "workers", cfg.workers);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      read_opt(o, "lr", cfg.optimizer.lr);
      read_opt(o, "weight_decay", cfg.optimizer.weight_decay);
      read_opt(o, "beta1", cfg.optimizer.beta1);
      read_opt(o, "beta2", cfg.optimizer.beta2);
      read_opt(o, "epsilon", cfg.optimizer.epsilon);
    }
    if (j.contains("loss")) {
      read_opt(j.at("loss"), "lambda_dice", cfg.loss.dice);
      read_opt(j.at("loss"), "lambda_ce", cfg.loss.ce);
    }
    if (j.contains("merge")) {
      read_opt(j.at("merge"), "alpha", cfg.merge.alpha);
      read_opt(j.at("merge"), "epsilon_gate", cfg.merge.epsilon_gate);
    }
    read_opt(j, "general_k", cfg.general_k);
    if (j.contains("qc")) {
      const auto& q = j.at("qc");
      read_opt(q, "z_threshold", cfg.qc_z_threshold);
      if (q.contains("inject_outliers")) {
        cfg.inject_outliers.clear();
        for (const auto& o : q.at("inject_outliers")) {
          OutlierInjection inj;
          inj.domain_id = o.at("domain_id").get<std::string>();
          read_opt(o, "noise_scale", inj.noise_scale);
          cfg.inject_outliers.push_back(inj);
        }
      }
    }
    if (j.contains("federation")) {
      const auto& f = j.at("federation");
      read_opt(f, "address", cfg.federation.address);
      if (f.contains("registry_dir") && !f.at("registry_dir").is_null())
        cfg.federation.registry_dir = f.at("registry_dir").get<std::string>();
      read_opt(f, "api_keys", cfg.federation.api_keys);
      read_opt(f, "client_api_key", cfg.federation.client_api_key);
      read_opt(f, "retries", cfg.federation.retries);
      read_opt(f, "corruption_rate", cfg.federation.corruption_rate);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("config field has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void apply_environment_overrides(ExperimentConfig& cfg) {
  if (const char* v = std::getenv("PLEXFED_OUTPUT_DIR"); v && *v) cfg.output_dir = v;
  if (const char* v = std::getenv("PLEXFED_ADDR"); v && *v) cfg.federation.address = v;
  if (const char* v = std::getenv("PLEXFED_REGISTRY_DIR"); v && *v) cfg.federation.registry_dir = std::filesystem::path(v);
  if (const char* v = std::getenv("PLEXFED_API_KEY"); v && *v) {
    cfg.federation.api_keys = {v};
    cfg.federation.client_api_key = v;
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = parse_experiment_config(ss.str());
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  if (cfg.output_dir.is_relative()) cfg.output_dir = base / cfg.output_dir;
  if (cfg.federation.registry_dir && cfg.federation.registry_dir->is_relative())
    cfg.federation.registry_dir = base / *cfg.federation.registry_dir;
  apply_environment_overrides(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace plexfed
