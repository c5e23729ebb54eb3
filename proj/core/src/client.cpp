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

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "plexfed/error.hpp"
#include "plexfed/federation.hpp"
#include "plexfed/metrics.hpp"
#include "plexfed/rng.hpp"

namespace plexfed {

using nlohmann::json;

namespace {

httplib::Client make_http(const ClientConfig& c) {
  httplib::Client http(c.host, c.port);
  http.set_connection_timeout(c.timeout);
  http.set_read_timeout(c.timeout);
  http.set_write_timeout(c.timeout);
  return http;
}

template <typename Call>
httplib::Result with_retries(const ClientConfig& c, const std::string& what, Call call) {
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= c.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(c.retry_delay);
    auto http = make_http(c);
    httplib::Result res = call(http);
    if (res) return res;
    last_error = httplib::to_string(res.error());
  }
  fail(ErrorCode::kNetwork, what + " failed after " + std::to_string(c.retries + 1) + " attempts: " + last_error);
}

std::optional<double> optional_double(const json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  return body.at(key).get<double>();
}

SubmitStatus status_from(const std::string& s) {
  for (auto st : {SubmitStatus::kAccepted, SubmitStatus::kRejectedValidation, SubmitStatus::kRejectedVolumes,
                  SubmitStatus::kAuthFailed, SubmitStatus::kIntegrityFailed, SubmitStatus::kStructuralFailed,
                  SubmitStatus::kNotFound}) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorCode::kFormat, "unknown submit status '" + s + "'");
}

double median_local_dice(const ModelBundle& b, const std::vector<LabeledVolume>& local) {
  std::vector<double> scores;
  for (const auto& lv : local) scores.push_back(dice(ensemble_predict(b, lv.image), lv.mask));
  return median_iqr(scores).median;
}

}  // namespace

FederationClient::FederationClient(ClientConfig config) : config_(std::move(config)) {}

DownloadedModel FederationClient::fetch_latest(const std::string& region) const {
  const std::string path = "/v1/models/" + region + "/latest";
  auto res = with_retries(config_, "GET " + path, [&](httplib::Client& http) { return http.Get(path); });
  require(res->status != 404, ErrorCode::kNotFound, "server has no region '" + region + "'");
  require(res->status == 200, ErrorCode::kNetwork, "GET " + path + " returned HTTP " + std::to_string(res->status));
  DownloadedModel out;
  std::vector<std::uint8_t> payload;
  try {
    const json body = json::parse(res->body);
    out.version = body.at("version").get<std::uint64_t>();
    out.checksum_hex = body.at("checksum_hex").get<std::string>();
    out.created_at = body.at("created_at").get<std::string>();
    out.reference_dice = body.at("reference_dice").get<double>();
    payload = base64_decode(body.at("payload_b64").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed latest-model response: ") + e.what());
  }
  require(to_hex(sha256(payload)) == out.checksum_hex, ErrorCode::kIntegrity,
          "downloaded model checksum mismatch");
  out.bundle = deserialize(payload);
  return out;
}

SubmitOutcome FederationClient::submit(const UpdateEnvelope& env) const {
  const std::string path = "/v1/models/" + env.region + "/updates";
  const json body{{"client_id", env.client_id},
                  {"base_version", env.base_version},
                  {"volume_count", env.volume_count},
                  {"iterations", env.iterations},
                  {"seed", env.seed},
                  {"payload_b64", base64_encode(env.payload)},
                  {"payload_checksum_hex", env.payload_checksum_hex}};
  const std::string text = body.dump();
  const httplib::Headers headers{{"X-Api-Key", env.api_key}};
  auto res = with_retries(config_, "POST " + path, [&](httplib::Client& http) {
    return http.Post(path, headers, text, "application/json");
  });
  SubmitOutcome out;
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, "POST " + path + " returned HTTP " + std::to_string(res->status) + " without JSON");
  }
  if (reply.contains("status")) {
    out.status = status_from(reply.at("status").get<std::string>());
  } else {
    out.status = res->status == 401 ? SubmitStatus::kAuthFailed : SubmitStatus::kIntegrityFailed;
  }
  out.reason = reply.value("reason", "");
  out.stale_base = reply.value("stale_base", false);
  if (out.accepted()) {
    out.version = reply.at("version").get<std::uint64_t>();
    out.reference_dice = reply.at("reference_dice").get<double>();
  }
  out.candidate_dice = optional_double(reply, "candidate_dice");
  out.current_dice = optional_double(reply, "current_dice");
  return out;
}

RoundReport run_il_round(const FederationClient& client, const std::string& region,
                         const std::vector<LabeledVolume>& local, const RoundOptions& options) {
  require(local.size() >= kMinLabeledVolumes, ErrorCode::kInsufficientVolumes,
          "insufficient volumes: an incremental-learning round needs at least ten labelled 3D volumes");
  const DownloadedModel head = client.fetch_latest(region);
  RoundReport report;
  report.base_version = head.version;

  // Apply the downloaded model, then let the simulated expert correct it.
  std::vector<LabeledVolume> annotated;
  annotated.reserve(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    const Mask pred = ensemble_predict(head.bundle, local[i].image);
    annotated.push_back({local[i].image, oracle_annotate(pred, local[i].mask, options.corruption_rate,
                                                         derive_seed(options.seed, {0x0AC1Eull, i}))});
  }
  report.local_dice_before = median_local_dice(head.bundle, annotated);

  IncrementalOptions training = options.training;
  training.regime.seed = options.seed;
  const SlotTrainingResult trained = local_incremental_learn(head.bundle, annotated, training);
  report.iterations = trained.iterations;
  report.local_bundle = trained.bundle;
  report.local_dice_after = median_local_dice(trained.bundle, annotated);

  UpdateEnvelope env;
  env.region = region;
  env.client_id = client.config().client_id;
  env.api_key = client.config().api_key;
  env.base_version = head.version;
  env.volume_count = annotated.size();
  env.iterations = trained.iterations;
  env.seed = options.seed;
  env.payload = serialize(trained.bundle);
  env.payload_checksum_hex = to_hex(sha256(env.payload));
  report.outcome = client.submit(env);
  return report;
}

}  // namespace plexfed
