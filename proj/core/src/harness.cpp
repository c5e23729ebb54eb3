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

#include "plexfed/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plexfed/error.hpp"
#include "plexfed/hashing.hpp"
#include "plexfed/registry.hpp"
#include "plexfed/rng.hpp"
#include "plexfed/vol_io.hpp"

namespace plexfed {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

namespace {

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  fail(ErrorCode::kFormat, "unknown split '" + s + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

std::string subject_name(const std::string& domain, char tag, std::size_t idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_%c%03zu", tag, idx);
  return domain + buf;
}

json qc_metrics_json(const QcMetrics& m) {
  return {{"mean", m[0]}, {"std", m[1]}, {"snr", m[2]}, {"gradient_energy", m[3]}};
}

QcMetrics qc_metrics_from_json(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("snr").get<double>(),
          j.at("gradient_energy").get<double>()};
}

struct CohortMember {
  std::string subject_id;
  std::uint64_t seed = 0;
  bool injected = false;
  LabeledVolume data;
};

}  // namespace

std::vector<const SubjectEntry*> DomainManifest::split(Split s) const {
  std::vector<const SubjectEntry*> out;
  for (const auto& e : subjects)
    if (e.split == s) out.push_back(&e);
  return out;
}

const DomainManifest& Manifest::domain(std::string_view id) const {
  for (const auto& d : domains)
    if (d.domain_id == id) return d;
  fail(ErrorCode::kNotFound, "manifest has no domain '" + std::string(id) + "'");
}

std::string Manifest::to_json() const {
  json doms = json::array();
  for (const auto& d : domains) {
    json subjects = json::array();
    for (const auto& s : d.subjects) {
      subjects.push_back({{"subject_id", s.subject_id},
                          {"split", std::string(to_string(s.split))},
                          {"seed", s.seed},
                          {"image", s.image_file},
                          {"mask", s.mask_file},
                          {"image_sha256", s.image_sha256},
                          {"mask_sha256", s.mask_sha256},
                          {"foreground_voxels", s.foreground_voxels}});
    }
    json excluded = json::array();
    for (const auto& e : d.excluded) {
      excluded.push_back({{"subject_id", e.subject_id},
                          {"seed", e.seed},
                          {"injected_outlier", e.injected_outlier},
                          {"z", qc_metrics_json(e.z)}});
    }
    doms.push_back({{"domain_id", d.domain_id},
                    {"train_count", d.train_count},
                    {"test_count", d.test_count},
                    {"subjects", subjects},
                    {"qc", {{"screened", d.screened}, {"excluded", excluded}, {"unassigned", d.unassigned}}}});
  }
  json j = {{"format", "plexfed-manifest/1"},
            {"data_seed", data_seed},
            {"qc_z_threshold", qc_z_threshold},
            {"domains", doms}};
  return j.dump(2) + "\n";
}

Manifest Manifest::from_json(std::string_view text) {
  Manifest m;
  try {
    const json j = json::parse(text);
    require(j.value("format", "") == "plexfed-manifest/1", ErrorCode::kFormat, "not a plexfed manifest");
    m.data_seed = j.at("data_seed").get<std::uint64_t>();
    m.qc_z_threshold = j.at("qc_z_threshold").get<double>();
    for (const auto& dj : j.at("domains")) {
      DomainManifest d;
      d.domain_id = dj.at("domain_id").get<std::string>();
      d.train_count = dj.at("train_count").get<std::size_t>();
      d.test_count = dj.at("test_count").get<std::size_t>();
      for (const auto& sj : dj.at("subjects")) {
        SubjectEntry s;
        s.subject_id = sj.at("subject_id").get<std::string>();
        s.split = split_from_string(sj.at("split").get<std::string>());
        s.seed = sj.at("seed").get<std::uint64_t>();
        s.image_file = sj.at("image").get<std::string>();
        s.mask_file = sj.at("mask").get<std::string>();
        s.image_sha256 = sj.at("image_sha256").get<std::string>();
        s.mask_sha256 = sj.at("mask_sha256").get<std::string>();
        s.foreground_voxels = sj.at("foreground_voxels").get<std::size_t>();
        d.subjects.push_back(std::move(s));
      }
      const auto& qc = dj.at("qc");
      d.screened = qc.at("screened").get<std::size_t>();
      for (const auto& ej : qc.at("excluded")) {
        QcExclusion e;
        e.subject_id = ej.at("subject_id").get<std::string>();
        e.seed = ej.at("seed").get<std::uint64_t>();
        e.injected_outlier = ej.at("injected_outlier").get<bool>();
        e.z = qc_metrics_from_json(ej.at("z"));
        d.excluded.push_back(std::move(e));
      }
      d.unassigned = qc.at("unassigned").get<std::vector<std::string>>();
      m.domains.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string ft_model_id(std::size_t k) { return "FT" + std::to_string(k); }
std::string il_model_id(std::size_t k) { return "IL" + std::to_string(k); }

Manifest cmd_gen_data(const ExperimentConfig& cfg, bool force) {
  cfg.validate();
  const fs::path out = cfg.output_dir;
  if (fs::exists(out) && !fs::is_empty(out)) {
    require(force, ErrorCode::kInvalidArgument,
            "output directory " + out.string() + " is not empty; pass --force to regenerate the data");
    fs::remove_all(cfg.data_dir());
    fs::remove(cfg.manifest_path());
  }
  fs::create_directories(cfg.data_dir());

  Manifest manifest;
  manifest.data_seed = cfg.data_seed;
  manifest.qc_z_threshold = cfg.qc_z_threshold;
  for (std::size_t di = 0; di < cfg.domains.size(); ++di) {
    const DomainCohort& cohort = cfg.domains[di];
    const DomainSpec& spec = cohort.spec;
    const std::size_t needed = cohort.train_count + cohort.test_count;

    std::vector<CohortMember> members;
    std::size_t next_index = 0;
    auto add_regular = [&](std::size_t count) {
      for (std::size_t i = 0; i < count; ++i, ++next_index) {
        const std::uint64_t seed = derive_seed(cfg.data_seed, {0xDA7Aull, di, next_index});
        CohortMember m{subject_name(spec.domain_id, 's', next_index), seed, false, generate_phantom(spec, seed)};
        members.push_back(std::move(m));
      }
    };
    add_regular(needed);
    std::size_t outlier_index = 0;
    for (const auto& inj : cfg.inject_outliers) {
      if (inj.domain_id != spec.domain_id) continue;
      DomainSpec noisy = spec;
      noisy.noise_sigma = std::max(spec.noise_sigma, 0.01) * inj.noise_scale;
      const std::uint64_t seed = derive_seed(cfg.data_seed, {0x0DDull, di, outlier_index});
      members.push_back({subject_name(spec.domain_id, 'x', outlier_index), seed, true, generate_phantom(noisy, seed)});
      ++outlier_index;
    }
    for (auto& m : members) {
      m.data.image.info.subject_id = m.subject_id;
      m.data.mask.info.subject_id = m.subject_id;
    }

    // Screen the cohort; replace excluded subjects until the splits can be filled.
    std::set<std::string> flagged;
    QcReport report;
    for (int pass = 0;; ++pass) {
      std::vector<Volume> images;
      for (const auto& m : members) images.push_back(m.data.image);
      report = qc_screen(images, cfg.qc_z_threshold);
      flagged.insert(report.flagged.begin(), report.flagged.end());
      std::size_t usable = 0;
      for (const auto& m : members)
        if (!m.injected && !flagged.count(m.subject_id)) ++usable;
      if (usable >= needed) break;
      require(pass < 8, ErrorCode::kInvalidArgument,
              "QC excluded too many subjects in domain " + spec.domain_id + " to fill the splits");
      add_regular(needed - usable);
      for (std::size_t i = members.size() - (needed - usable); i < members.size(); ++i) {
        members[i].data.image.info.subject_id = members[i].subject_id;
        members[i].data.mask.info.subject_id = members[i].subject_id;
      }
    }

    DomainManifest dm;
    dm.domain_id = spec.domain_id;
    dm.train_count = cohort.train_count;
    dm.test_count = cohort.test_count;
    dm.screened = members.size();
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      const auto& m = members[i];
      if (flagged.count(m.subject_id)) {
        QcExclusion e{m.subject_id, m.seed, m.injected, {}};
        for (const auto& s : report.subjects)
          if (s.subject_id == m.subject_id) e.z = s.z;
        dm.excluded.push_back(e);
        continue;
      }
      if (m.injected || assigned >= needed) {
        dm.unassigned.push_back(m.subject_id);
        continue;
      }
      const Split split = assigned < cohort.train_count ? Split::kTrain : Split::kTest;
      ++assigned;
      const std::string rel_dir = "data/" + spec.domain_id + "/" + std::string(to_string(split)) + "/";
      SubjectEntry e;
      e.subject_id = m.subject_id;
      e.split = split;
      e.seed = m.seed;
      e.image_file = rel_dir + m.subject_id + "_image.vol";
      e.mask_file = rel_dir + m.subject_id + "_mask.vol";
      const auto img = encode_vol1(m.data.image);
      const auto msk = encode_vol1(m.data.mask);
      write_file(out / e.image_file, img);
      write_file(out / e.mask_file, msk);
      e.image_sha256 = to_hex(sha256(img));
      e.mask_sha256 = to_hex(sha256(msk));
      e.foreground_voxels = m.data.mask.foreground();
      dm.subjects.push_back(std::move(e));
    }
    std::stable_sort(dm.subjects.begin(), dm.subjects.end(),
                     [](const SubjectEntry& a, const SubjectEntry& b) { return a.split < b.split; });
    manifest.domains.push_back(std::move(dm));
  }
  write_text(cfg.manifest_path(), manifest.to_json());
  write_text(cfg.output_dir / "config.json", experiment_config_json(cfg));
  return manifest;
}

Manifest load_manifest(const ExperimentConfig& cfg) {
  require(fs::exists(cfg.manifest_path()), ErrorCode::kNotFound,
          "no manifest at " + cfg.manifest_path().string() + "; run gen-data first");
  return Manifest::from_json(read_text(cfg.manifest_path()));
}

std::vector<LabeledVolume> load_split(const ExperimentConfig& cfg, const Manifest& manifest,
                                      std::string_view domain_id, Split split) {
  std::vector<LabeledVolume> out;
  for (const SubjectEntry* e : manifest.domain(domain_id).split(split)) {
    const auto img = read_file(cfg.output_dir / e->image_file);
    const auto msk = read_file(cfg.output_dir / e->mask_file);
    require(to_hex(sha256(img)) == e->image_sha256 && to_hex(sha256(msk)) == e->mask_sha256,
            ErrorCode::kChecksum, "file checksum differs from manifest for " + e->subject_id);
    auto image = std::get<Volume>(decode_vol1(img));
    auto mask = std::get<Mask>(decode_vol1(msk));
    image = normalize_intensity(image);
    out.push_back({std::move(image), std::move(mask)});
  }
  return out;
}

std::vector<MetricsRow> evaluate_model(const std::string& model_id, const ModelBundle& bundle,
                                       const std::string& dataset_id, const std::vector<LabeledVolume>& test_set) {
  std::vector<MetricsRow> rows;
  for (const auto& lv : test_set) {
    const Mask pred = ensemble_predict(bundle, lv.image);
    rows.push_back({model_id, dataset_id, lv.mask.info.subject_id, dice(pred, lv.mask), volume_mm3(pred),
                    volume_mm3(lv.mask)});
  }
  return rows;
}

void save_bundle(const fs::path& path, const ModelBundle& bundle) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, serialize(bundle));
}

ModelBundle load_bundle(const fs::path& path) {
  require(fs::exists(path), ErrorCode::kNotFound, "bundle not found: " + path.string());
  return deserialize(read_file(path));
}

namespace {

RegimeOptions regime(const ExperimentConfig& cfg, std::uint64_t iters, std::uint64_t seed, std::string label) {
  RegimeOptions o;
  o.max_iters = iters;
  o.seed = seed;
  o.augment = cfg.augment;
  o.workers = cfg.workers;
  o.loss = cfg.loss;
  o.optimizer = cfg.optimizer;
  o.version_label = std::move(label);
  return o;
}

MetricsReport evaluate_all(const ExperimentConfig& cfg, const Manifest& manifest,
                           const std::vector<std::pair<std::string, const ModelBundle*>>& models) {
  MetricsReport report;
  for (const auto& d : cfg.domains) {
    const auto test = load_split(cfg, manifest, d.spec.domain_id, Split::kTest);
    for (const auto& [id, bundle] : models) {
      auto rows = evaluate_model(id, *bundle, d.spec.domain_id, test);
      report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
  }
  // Model-major order keeps each model's rows contiguous.
  std::vector<std::string> order;
  for (const auto& m : models) order.push_back(m.first);
  std::stable_sort(report.rows.begin(), report.rows.end(), [&](const MetricsRow& a, const MetricsRow& b) {
    return std::find(order.begin(), order.end(), a.model_id) < std::find(order.begin(), order.end(), b.model_id);
  });
  return report;
}

}  // namespace

FtArmResult cmd_run_ft_arm(const ExperimentConfig& cfg) {
  cfg.validate();
  const Manifest manifest = load_manifest(cfg);
  FtArmResult result;

  const auto& d0 = cfg.domains[0].spec.domain_id;
  const auto initial = initial_training(load_split(cfg, manifest, d0, Split::kTrain), default_config_pool(),
                                        regime(cfg, cfg.budgets.initial, derive_seed(cfg.train_seed, {0x1}),
                                               std::string(kModel0)));
  const ModelBundle& model0 = initial.bundle;
  result.models[std::string(kModel0)] = model0;

  std::vector<LabeledVolume> pooled;
  for (std::size_t k = 1; k < cfg.domains.size(); ++k) {
    auto subjects = load_split(cfg, manifest, cfg.domains[k].spec.domain_id, Split::kTrain);
    const auto ft = fine_tune(model0, subjects,
                              regime(cfg, cfg.budgets.fine_tune(), derive_seed(cfg.train_seed, {0x2, k}), ft_model_id(k)));
    result.models[ft_model_id(k)] = ft.bundle;
    pooled.insert(pooled.end(), std::make_move_iterator(subjects.begin()), std::make_move_iterator(subjects.end()));
  }
  const auto ftall = fine_tune(model0, pooled,
                               regime(cfg, cfg.budgets.fine_tune(), derive_seed(cfg.train_seed, {0x3}), std::string(kFtAll)));
  result.models[std::string(kFtAll)] = ftall.bundle;

  std::vector<std::pair<std::string, const ModelBundle*>> order{{std::string(kModel0), &result.models[std::string(kModel0)]}};
  for (std::size_t k = 1; k < cfg.domains.size(); ++k) order.push_back({ft_model_id(k), &result.models[ft_model_id(k)]});
  order.push_back({std::string(kFtAll), &result.models[std::string(kFtAll)]});

  for (const auto& [id, bundle] : order) save_bundle(cfg.bundles_dir() / (id + ".pfb"), *bundle);
  result.evaluation = evaluate_all(cfg, manifest, order);
  write_text(cfg.reports_dir() / kFtRowsFile, result.evaluation.rows_csv());
  return result;
}

namespace {

ServerConfig server_config(const ExperimentConfig& cfg, int port_override) {
  ServerConfig sc;
  const auto [host, port] = parse_address(cfg.federation.address);
  sc.host = host;
  sc.port = port_override >= 0 ? port_override : port;
  sc.registry_dir = cfg.registry_dir();
  sc.reference_set_path = cfg.data_dir() / cfg.domains[1].spec.domain_id / "test";
  sc.policy = cfg.merge;
  sc.api_keys = cfg.federation.api_keys;
  return sc;
}

std::unique_ptr<FederationServer> open_server(const ExperimentConfig& cfg, const Manifest& manifest, int port_override) {
  auto reference = load_split(cfg, manifest, cfg.domains[1].spec.domain_id, Split::kTest);
  auto server = std::make_unique<FederationServer>(server_config(cfg, port_override), std::move(reference),
                                                   Registry::load(cfg.registry_dir()));
  server->bootstrap(std::string(kRegion), load_bundle(cfg.bundles_dir() / (std::string(kModel0) + ".pfb")));
  return server;
}

}  // namespace

std::unique_ptr<FederationServer> make_server(const ExperimentConfig& cfg, int port_override) {
  cfg.validate();
  return open_server(cfg, load_manifest(cfg), port_override);
}

IlArmResult cmd_run_il_arm(const ExperimentConfig& cfg, const IlArmOptions& options) {
  cfg.validate();
  const Manifest manifest = load_manifest(cfg);
  const fs::path model0_path = cfg.bundles_dir() / (std::string(kModel0) + ".pfb");
  require(fs::exists(model0_path), ErrorCode::kNotFound, "Model 0 bundle missing; run run-ft first");
  require(!(options.server_address && options.restart_after_round), ErrorCode::kInvalidArgument,
          "registry restart is only available with the in-process server");

  std::unique_ptr<FederationServer> server;
  ClientConfig client_cfg;
  client_cfg.api_key = cfg.federation.client_api_key;
  client_cfg.retries = cfg.federation.retries;
  auto boot_local = [&] {
    server = open_server(cfg, manifest, 0);
    client_cfg.host = parse_address(cfg.federation.address).first;
    client_cfg.port = server->start();
  };
  if (options.server_address) {
    std::tie(client_cfg.host, client_cfg.port) = parse_address(*options.server_address);
  } else {
    // A fresh lineage for this run; FT-arm artifacts are left untouched.
    fs::remove_all(cfg.registry_dir());
    boot_local();
  }

  IlArmResult result;
  for (std::size_t k = 1; k < cfg.domains.size(); ++k) {
    const std::string& domain_id = cfg.domains[k].spec.domain_id;
    client_cfg.client_id = "site-" + domain_id;
    const FederationClient client(client_cfg);
    const auto local = load_split(cfg, manifest, domain_id, Split::kTrain);
    RoundOptions ro;
    ro.training.regime =
        regime(cfg, cfg.budgets.incremental_cap(), derive_seed(cfg.train_seed, {0x4, k}), il_model_id(k));
    ro.training.epochs = kLocalEpochs;
    ro.corruption_rate = cfg.federation.corruption_rate;
    ro.seed = derive_seed(cfg.train_seed, {0x5, k});
    const RoundReport rr = run_il_round(client, std::string(kRegion), local, ro);
    const DownloadedModel head = client.fetch_latest(std::string(kRegion));

    IlRoundRecord rec;
    rec.round = k;
    rec.domain_id = domain_id;
    rec.client_id = client_cfg.client_id;
    rec.base_version = rr.base_version;
    rec.head_version = head.version;
    rec.head_checksum_hex = head.checksum_hex;
    rec.outcome = rr.outcome;
    rec.iterations = rr.iterations;
    rec.local_dice_before = rr.local_dice_before;
    rec.local_dice_after = rr.local_dice_after;
    result.rounds.push_back(rec);
    result.models[il_model_id(k)] = head.bundle;
    save_bundle(cfg.bundles_dir() / (il_model_id(k) + ".pfb"), head.bundle);

    if (server && options.restart_after_round && *options.restart_after_round == k) {
      server->stop();
      server.reset();
      boot_local();
    }
  }
  if (server) server->stop();

  std::vector<std::pair<std::string, const ModelBundle*>> order;
  for (std::size_t k = 1; k < cfg.domains.size(); ++k) order.push_back({il_model_id(k), &result.models[il_model_id(k)]});
  result.evaluation = evaluate_all(cfg, manifest, order);
  write_text(cfg.reports_dir() / kIlRowsFile, result.evaluation.rows_csv());
  write_text(cfg.reports_dir() / kIlRoundsFile, il_rounds_csv(result.rounds));
  return result;
}

std::string il_rounds_csv(const std::vector<IlRoundRecord>& rounds) {
  std::ostringstream os;
  os << "round,domain_id,client_id,base_version,status,accepted,stale_base,candidate_dice,current_dice,"
        "head_version,head_checksum,iterations,local_dice_before,local_dice_after\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& r : rounds) {
    os << r.round << ',' << r.domain_id << ',' << r.client_id << ',' << r.base_version << ','
       << to_string(r.outcome.status) << ',' << (r.outcome.accepted() ? 1 : 0) << ',' << (r.outcome.stale_base ? 1 : 0)
       << ',' << opt(r.outcome.candidate_dice) << ',' << opt(r.outcome.current_dice) << ',' << r.head_version << ','
       << r.head_checksum_hex << ',' << r.iterations << ',' << format_double(r.local_dice_before) << ','
       << format_double(r.local_dice_after) << '\n';
  }
  return os.str();
}

std::vector<AggregateCell> table_cells(const MetricsReport& rows, const std::vector<std::string>& models,
                                       const std::vector<std::string>& datasets, std::size_t general_k,
                                       std::map<std::string, std::map<std::string, std::vector<std::string>>>* selection) {
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> by_cell;
  for (const auto& r : rows.rows) by_cell[{r.model_id, r.dataset_id}].push_back(&r);
  std::vector<AggregateCell> cells;
  for (const auto& m : models) {
    std::map<std::string, std::vector<SubjectScore>> per_dataset;
    for (const auto& d : datasets) {
      const auto it = by_cell.find({m, d});
      require(it != by_cell.end() && !it->second.empty(), ErrorCode::kNotFound,
              "missing evaluation rows for cell (" + m + ", " + d + ")");
      std::vector<double> values;
      for (const MetricsRow* r : it->second) {
        values.push_back(r->dice);
        per_dataset[d].push_back({r->subject_id, r->dice});
      }
      const auto s = median_iqr(values);
      cells.push_back({m, d, values.size(), s.median, s.iqr});
    }
    const auto picked = general_sample(per_dataset, general_k);
    std::vector<double> general;
    for (const auto& [d, ids] : picked) {
      for (const auto& id : ids)
        for (const auto& s : per_dataset.at(d))
          if (s.subject_id == id) general.push_back(s.dice);
    }
    const auto s = median_iqr(general);
    cells.push_back({m, "General", general.size(), s.median, s.iqr});
    if (selection) (*selection)[m] = picked;
  }
  return cells;
}

namespace {

std::string wide_table_csv(const std::vector<AggregateCell>& cells, const std::vector<std::string>& columns) {
  std::ostringstream os;
  os << "model_id";
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  std::vector<std::string> models;
  for (const auto& c : cells)
    if (std::find(models.begin(), models.end(), c.model_id) == models.end()) models.push_back(c.model_id);
  for (const auto& m : models) {
    os << m;
    for (const auto& col : columns) {
      os << ',';
      for (const auto& c : cells)
        if (c.model_id == m && c.dataset_id == col) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.3f [%.3f]", c.median_dice, c.iqr_dice);
          os << buf;
        }
    }
    os << '\n';
  }
  return os.str();
}

std::string selection_csv(const std::map<std::string, std::map<std::string, std::vector<std::string>>>& sel,
                          const std::vector<std::string>& models) {
  std::ostringstream os;
  os << "model_id,dataset_id,subject_id\n";
  for (const auto& m : models)
    for (const auto& [d, ids] : sel.at(m))
      for (const auto& id : ids) os << m << ',' << d << ',' << id << '\n';
  return os.str();
}

MetricsReport read_rows(const ExperimentConfig& cfg, std::string_view file, const std::string& first_model,
                        const std::string& first_dataset) {
  const fs::path path = cfg.reports_dir() / file;
  require(fs::exists(path), ErrorCode::kNotFound,
          "missing evaluation rows for cell (" + first_model + ", " + first_dataset + "): " + path.string() +
              " not found");
  return MetricsReport::from_csv(read_text(path));
}

}  // namespace

ReportOutputs cmd_report(const ExperimentConfig& cfg) {
  cfg.validate();
  const Manifest manifest = load_manifest(cfg);
  std::vector<std::string> datasets;
  for (const auto& d : cfg.domains) datasets.push_back(d.spec.domain_id);
  const std::size_t n_sites = cfg.domains.size() - 1;

  std::vector<std::string> ft_models{std::string(kModel0)};
  for (std::size_t k = 1; k <= n_sites; ++k) ft_models.push_back(ft_model_id(k));
  ft_models.push_back(std::string(kFtAll));
  std::vector<std::string> il_models{std::string(kModel0)};
  for (std::size_t k = 1; k <= n_sites; ++k) il_models.push_back(il_model_id(k));

  const MetricsReport ft_rows = read_rows(cfg, kFtRowsFile, ft_models.front(), datasets.front());
  const MetricsReport il_only = read_rows(cfg, kIlRowsFile, il_models[1], datasets.front());
  MetricsReport il_rows;
  for (const auto& r : ft_rows.rows)
    if (r.model_id == kModel0) il_rows.rows.push_back(r);
  il_rows.rows.insert(il_rows.rows.end(), il_only.rows.begin(), il_only.rows.end());

  // Each cell must be backed by one row per test subject in the manifest.
  auto check_counts = [&](const MetricsReport& rows, const std::vector<std::string>& models) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& r : rows.rows) ++counts[{r.model_id, r.dataset_id}];
    for (const auto& m : models)
      for (const auto& d : datasets) {
        const std::size_t expected = manifest.domain(d).split(Split::kTest).size();
        require(counts[{m, d}] == expected, ErrorCode::kNotFound,
                "missing evaluation rows for cell (" + m + ", " + d + "): have " + std::to_string(counts[{m, d}]) +
                    " of " + std::to_string(expected));
      }
  };
  check_counts(ft_rows, ft_models);
  check_counts(il_rows, il_models);

  ReportOutputs out;
  std::map<std::string, std::map<std::string, std::vector<std::string>>> ft_sel, il_sel;
  out.ft_table = table_cells(ft_rows, ft_models, datasets, cfg.general_k, &ft_sel);
  out.il_table = table_cells(il_rows, il_models, datasets, cfg.general_k, &il_sel);
  std::vector<std::string> columns = datasets;
  columns.push_back("General");
  out.files["ft_table.csv"] = MetricsReport::aggregate_csv(out.ft_table);
  out.files["il_table.csv"] = MetricsReport::aggregate_csv(out.il_table);
  out.files["ft_table_wide.csv"] = wide_table_csv(out.ft_table, columns);
  out.files["il_table_wide.csv"] = wide_table_csv(out.il_table, columns);
  out.files["general_selection_ft.csv"] = selection_csv(ft_sel, ft_models);
  out.files["general_selection_il.csv"] = selection_csv(il_sel, il_models);

  // Predicted vs. reference volumes with an OLS fit per (model, dataset).
  std::ostringstream vol, fits;
  vol << "model_id,dataset_id,subject_id,gt_vol_mm3,pred_vol_mm3,fitted_mm3,band_lower_mm3,band_upper_mm3\n";
  fits << "model_id,dataset_id,n,slope,intercept,residual_variance\n";
  const std::string last_il = il_model_id(n_sites);
  for (const auto& [model, rows] : {std::pair{std::string(kFtAll), &ft_rows}, std::pair{last_il, static_cast<const MetricsReport*>(&il_rows)}}) {
    for (const auto& d : datasets) {
      std::vector<const MetricsRow*> cell;
      for (const auto& r : rows->rows)
        if (r.model_id == model && r.dataset_id == d) cell.push_back(&r);
      std::vector<double> pred, gt;
      for (const MetricsRow* r : cell) {
        pred.push_back(r->pred_vol_mm3);
        gt.push_back(r->gt_vol_mm3);
      }
      const RegressionFit fit = ols_fit(pred, gt);
      fits << model << ',' << d << ',' << fit.n << ',' << format_double(fit.slope) << ','
           << format_double(fit.intercept) << ',' << format_double(fit.residual_variance) << '\n';
      for (std::size_t i = 0; i < cell.size(); ++i) {
        const double y = fit.intercept + fit.slope * gt[i];
        vol << model << ',' << d << ',' << cell[i]->subject_id << ',' << format_double(gt[i]) << ','
            << format_double(pred[i]) << ',' << format_double(y) << ',' << format_double(y - fit.band_half_width[i])
            << ',' << format_double(y + fit.band_half_width[i]) << '\n';
      }
    }
  }
  out.files["volume_pairs.csv"] = vol.str();
  out.files["volume_fits.csv"] = fits.str();
  for (const auto& [name, text] : out.files) write_text(cfg.reports_dir() / name, text);
  return out;
}

std::string EvalOutput::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"subject_id", r.subject_id},
                      {"dice", r.dice},
                      {"pred_vol_mm3", r.pred_vol_mm3},
                      {"gt_vol_mm3", r.gt_vol_mm3}});
  json j = {{"model", model_version},
            {"dataset", dataset},
            {"n", rows.size()},
            {"median_dice", summary.median},
            {"iqr_dice", summary.iqr},
            {"subjects", rows_j}};
  return j.dump(2) + "\n";
}

EvalOutput cmd_eval(const fs::path& bundle_path, const std::string& dataset, const std::optional<ExperimentConfig>& cfg) {
  const ModelBundle bundle = load_bundle(bundle_path);
  std::vector<LabeledVolume> test;
  if (fs::is_directory(dataset)) {
    std::vector<fs::path> images;
    for (const auto& entry : fs::recursive_directory_iterator(dataset)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.size() > 10 && name.ends_with("_image.vol")) images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    require(!images.empty(), ErrorCode::kNotFound, "no *_image.vol files under " + dataset);
    for (const auto& img : images) {
      const std::string stem = img.filename().string();
      const fs::path mask = img.parent_path() / (stem.substr(0, stem.size() - 10) + "_mask.vol");
      require(fs::exists(mask), ErrorCode::kNotFound, "no mask next to " + img.string());
      Volume v = read_volume(img);
      v = normalize_intensity(v);
      test.push_back({std::move(v), read_mask(mask)});
    }
  } else {
    require(cfg.has_value(), ErrorCode::kInvalidArgument,
            "dataset '" + dataset + "' is not a directory; pass --config to resolve it as a domain id");
    test = load_split(*cfg, load_manifest(*cfg), dataset, Split::kTest);
  }
  EvalOutput out;
  out.model_version = bundle.version;
  out.dataset = dataset;
  out.rows = evaluate_model(bundle.version, bundle, dataset, test);
  std::vector<double> values;
  for (const auto& r : out.rows) values.push_back(r.dice);
  out.summary = median_iqr(values);
  return out;
}

}  // namespace plexfed
