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

#include "plexfed/federation.hpp"

#include <httplib.h>

#include <fstream>
#include <json.hpp>
#include <regex>
#include <thread>

#include "plexfed/error.hpp"

namespace plexfed {

using nlohmann::json;

std::string_view to_string(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::kAccepted: return "accepted";
    case SubmitStatus::kRejectedValidation: return "validation_rejected";
    case SubmitStatus::kRejectedVolumes: return "insufficient_volumes";
    case SubmitStatus::kAuthFailed: return "auth";
    case SubmitStatus::kIntegrityFailed: return "integrity";
    case SubmitStatus::kStructuralFailed: return "structural";
    case SubmitStatus::kNotFound: return "not_found";
  }
  return "unknown";
}

int http_status(SubmitStatus s) {
  switch (s) {
    case SubmitStatus::kAccepted: return 200;
    case SubmitStatus::kRejectedValidation:
    case SubmitStatus::kRejectedVolumes: return 422;
    case SubmitStatus::kAuthFailed: return 401;
    case SubmitStatus::kIntegrityFailed:
    case SubmitStatus::kStructuralFailed: return 400;
    case SubmitStatus::kNotFound: return 404;
  }
  return 500;
}

std::pair<std::string, int> parse_address(const std::string& address) {
  static const std::regex re(R"(^(?:https?://)?([^:/]+):(\d+)/?$)");
  std::smatch m;
  require(std::regex_match(address, m, re), ErrorCode::kInvalidArgument,
          "server address must look like host:port, got '" + address + "'");
  return {m[1].str(), std::stoi(m[2].str())};
}

struct FederationServer::Http {
  httplib::Server server;
  std::thread thread;
};

FederationServer::FederationServer(ServerConfig config, std::vector<LabeledVolume> reference_set, Registry registry)
    : config_(std::move(config)),
      reference_set_(std::move(reference_set)),
      registry_(std::move(registry)),
      http_(std::make_unique<Http>()) {
  config_.policy.validate();
  require(!reference_set_.empty(), ErrorCode::kInvalidArgument, "server reference set must be non-empty");
  for (const auto& k : config_.api_keys) key_digests_.push_back(sha256(k));

  auto& srv = http_->server;
  srv.new_task_queue = [n = config_.worker_threads] { return new httplib::ThreadPool(std::max(1u, n)); };

  srv.Get(R"(/v1/models/([A-Za-z0-9_\-]+)/latest)", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto latest = get_latest(req.matches[1]);
      json body{{"version", latest.version},
                {"checksum_hex", latest.checksum_hex},
                {"created_at", latest.created_at},
                {"reference_dice", latest.reference_dice},
                {"payload_b64", base64_encode(latest.payload)}};
      res.set_content(body.dump(), "application/json");
    } catch (const Error& e) {
      res.status = e.code() == ErrorCode::kNotFound ? 404 : 500;
      res.set_content(json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(),
                      "application/json");
    }
  });

  srv.Post(R"(/v1/models/([A-Za-z0-9_\-]+)/updates)", [this](const httplib::Request& req, httplib::Response& res) {
    UpdateEnvelope env;
    env.region = req.matches[1];
    env.api_key = req.get_header_value("X-Api-Key");
    try {
      const json body = json::parse(req.body);
      env.client_id = body.at("client_id").get<std::string>();
      env.base_version = body.at("base_version").get<std::uint64_t>();
      env.volume_count = body.at("volume_count").get<std::uint64_t>();
      env.iterations = body.at("iterations").get<std::uint64_t>();
      env.seed = body.at("seed").get<std::uint64_t>();
      env.payload_checksum_hex = body.at("payload_checksum_hex").get<std::string>();
      env.payload = base64_decode(body.at("payload_b64").get<std::string>());
    } catch (const std::exception& e) {
      // Authentication still takes precedence over a malformed body.
      const bool authed = authorized(env.api_key);
      res.status = authed ? 400 : 401;
      res.set_content(json{{"accepted", false}, {"reason", authed ? std::string("bad request: ") + e.what() : "auth"}}.dump(),
                      "application/json");
      return;
    }
    const SubmitOutcome out = submit_update(env);
    res.status = http_status(out.status);
    json body{{"accepted", out.accepted()}, {"reason", out.reason}, {"status", std::string(to_string(out.status))},
              {"stale_base", out.stale_base}};
    if (out.accepted()) {
      body["version"] = out.version;
      body["reference_dice"] = out.reference_dice;
    }
    body["candidate_dice"] = out.candidate_dice ? json(*out.candidate_dice) : json(nullptr);
    body["current_dice"] = out.current_dice ? json(*out.current_dice) : json(nullptr);
    res.set_content(body.dump(), "application/json");
  });
}

FederationServer::~FederationServer() { stop(); }

bool FederationServer::authorized(const std::string& api_key) const {
  if (api_key.empty()) return false;
  const Digest d = sha256(api_key);
  return std::find(key_digests_.begin(), key_digests_.end(), d) != key_digests_.end();
}

const ModelVersion& FederationServer::bootstrap(const std::string& region, const ModelBundle& bundle) {
  std::unique_lock lock(head_mu_);
  if (registry_.has_region(region)) return registry_.head(region);
  const double dice = reference_dice(bundle, reference_set_);
  return registry_.append(region, bundle, dice);
}

FederationServer::Latest FederationServer::get_latest(const std::string& region) const {
  std::shared_lock lock(head_mu_);
  const ModelVersion& h = registry_.head(region);
  return {h.version, to_hex(h.checksum), h.created_at, h.reference_dice, h.payload};
}

ModelVersion FederationServer::head(const std::string& region) const {
  std::shared_lock lock(head_mu_);
  return registry_.head(region);
}

std::vector<GateLogEntry> FederationServer::gate_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

void FederationServer::log_gate(const GateLogEntry& entry) {
  std::lock_guard lock(log_mu_);
  log_.push_back(entry);
  if (!config_.registry_dir.empty()) {
    std::filesystem::create_directories(config_.registry_dir);
    std::ofstream out(config_.registry_dir / "gate_log.jsonl", std::ios::app);
    json j{{"region", entry.region},
           {"client_id", entry.client_id},
           {"base_version", entry.base_version},
           {"head_before", entry.head_before},
           {"head_after", entry.head_after},
           {"stale_base", entry.stale_base},
           {"status", std::string(to_string(entry.status))},
           {"candidate_dice", entry.candidate_dice ? json(*entry.candidate_dice) : json(nullptr)},
           {"current_dice", entry.current_dice ? json(*entry.current_dice) : json(nullptr)},
           {"epsilon_gate", entry.epsilon_gate},
           {"reason", entry.reason}};
    out << j.dump() << '\n';
  }
}

SubmitOutcome FederationServer::submit_update(const UpdateEnvelope& env) {
  std::lock_guard serial(submit_mu_);
  SubmitOutcome out;
  GateLogEntry entry;
  entry.region = env.region;
  entry.client_id = env.client_id;
  entry.base_version = env.base_version;
  entry.epsilon_gate = config_.policy.epsilon_gate;
  auto finish = [&](SubmitStatus status, std::string reason) {
    out.status = status;
    out.reason = std::move(reason);
    entry.status = status;
    entry.reason = out.reason;
    entry.candidate_dice = out.candidate_dice;
    entry.current_dice = out.current_dice;
    entry.stale_base = out.stale_base;
    log_gate(entry);
    return out;
  };

  if (!authorized(env.api_key)) return finish(SubmitStatus::kAuthFailed, "invalid API key");

  ModelVersion current;
  {
    std::shared_lock lock(head_mu_);
    if (!registry_.has_region(env.region)) return finish(SubmitStatus::kNotFound, "unknown region " + env.region);
    current = registry_.head(env.region);
  }
  entry.head_before = entry.head_after = current.version;

  if (to_hex(sha256(env.payload)) != env.payload_checksum_hex) {
    return finish(SubmitStatus::kIntegrityFailed, "payload checksum mismatch");
  }
  ModelBundle incoming;
  try {
    incoming = deserialize(env.payload);
  } catch (const Error& e) {
    return finish(SubmitStatus::kIntegrityFailed, std::string("payload does not decode: ") + e.what());
  }
  if (env.volume_count < kMinLabeledVolumes) {
    return finish(SubmitStatus::kRejectedVolumes, "insufficient volumes: at least ten 3D volumes required, got " +
                                                      std::to_string(env.volume_count));
  }
  out.stale_base = env.base_version != current.version;

  ModelBundle merged;
  try {
    merged = merge(current.bundle, incoming, config_.policy);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kStructural) throw;
    return finish(SubmitStatus::kStructuralFailed, e.what());
  }
  const GateDecision gate = validate_candidate(merged, reference_set_, current.reference_dice, config_.policy);
  out.candidate_dice = gate.candidate_dice;
  out.current_dice = gate.current_dice;
  if (!gate.accepted) return finish(SubmitStatus::kRejectedValidation, gate.reason);

  {
    std::unique_lock lock(head_mu_);
    const ModelVersion& added = registry_.append(env.region, merged, gate.candidate_dice);
    out.version = added.version;
    out.reference_dice = added.reference_dice;
  }
  entry.head_after = out.version;
  return finish(SubmitStatus::kAccepted, out.stale_base ? "accepted (stale base merged against head)" : "accepted");
}

int FederationServer::start() {
  int port = config_.port;
  if (port == 0) {
    port = http_->server.bind_to_any_port(config_.host);
  } else {
    require(http_->server.bind_to_port(config_.host, port), ErrorCode::kNetwork,
            "cannot bind " + config_.host + ":" + std::to_string(port));
  }
  require(port > 0, ErrorCode::kNetwork, "cannot bind " + config_.host);
  http_->thread = std::thread([this] { http_->server.listen_after_bind(); });
  http_->server.wait_until_ready();
  config_.port = port;
  return port;
}

void FederationServer::listen() {
  require(http_->server.listen(config_.host, config_.port), ErrorCode::kNetwork,
          "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
}

void FederationServer::stop() {
  if (!http_) return;
  http_->server.stop();
  if (http_->thread.joinable()) http_->thread.join();
}

}  // namespace plexfed
