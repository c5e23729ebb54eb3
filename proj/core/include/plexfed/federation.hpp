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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "plexfed/merge.hpp"
#include "plexfed/pipeline.hpp"
#include "plexfed/registry.hpp"

namespace plexfed {

// Client-submitted update as seen by the server.
struct UpdateEnvelope {
  std::string region{kRegion};
  std::string client_id;
  std::string api_key;  // digested on arrival, never stored
  std::uint64_t base_version = 0;
  std::uint64_t volume_count = 0;
  std::uint64_t iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> payload;
  std::string payload_checksum_hex;
};

enum class SubmitStatus {
  kAccepted,
  kRejectedValidation,   // gate failure, 422
  kRejectedVolumes,      // fewer than ten volumes, 422
  kAuthFailed,           // 401
  kIntegrityFailed,      // checksum or payload decode, 400
  kStructuralFailed,     // merge config mismatch, 400
  kNotFound,             // unknown region, 404
};

std::string_view to_string(SubmitStatus s);
int http_status(SubmitStatus s);

struct SubmitOutcome {
  SubmitStatus status = SubmitStatus::kRejectedValidation;
  std::uint64_t version = 0;  // new head on acceptance
  double reference_dice = 0.0;
  std::optional<double> candidate_dice;
  std::optional<double> current_dice;
  std::string reason;
  bool stale_base = false;

  bool accepted() const { return status == SubmitStatus::kAccepted; }
};

struct GateLogEntry {
  std::string region;
  std::string client_id;
  std::uint64_t base_version = 0;
  std::uint64_t head_before = 0;
  std::uint64_t head_after = 0;
  bool stale_base = false;
  SubmitStatus status = SubmitStatus::kRejectedValidation;
  std::optional<double> candidate_dice;
  std::optional<double> current_dice;
  double epsilon_gate = 0.0;
  std::string reason;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8750;  // 0 picks a free port
  std::filesystem::path registry_dir;
  std::filesystem::path reference_set_path;
  MergePolicy policy{};
  std::vector<std::string> api_keys;
  unsigned worker_threads = 4;
};

// Parses "host:port" or "http://host:port".
std::pair<std::string, int> parse_address(const std::string& address);

class FederationServer {
 public:
  FederationServer(ServerConfig config, std::vector<LabeledVolume> reference_set, Registry registry);
  ~FederationServer();
  FederationServer(const FederationServer&) = delete;
  FederationServer& operator=(const FederationServer&) = delete;

  // Seeds an empty region with `bundle` as version 1; no-op when the region exists.
  const ModelVersion& bootstrap(const std::string& region, const ModelBundle& bundle);

  struct Latest {
    std::uint64_t version = 0;
    std::string checksum_hex;
    std::string created_at;
    double reference_dice = 0.0;
    std::vector<std::uint8_t> payload;
  };
  // Throws kNotFound.
  Latest get_latest(const std::string& region) const;

  // Auth, integrity, volume re-check, merge against the current head, gate,
  // append. Updates to one region are serialized; readers see the old or the
  // new head, never a partial one.
  SubmitOutcome submit_update(const UpdateEnvelope& env);

  std::vector<GateLogEntry> gate_log() const;
  ModelVersion head(const std::string& region) const;
  const MergePolicy& policy() const { return config_.policy; }

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Serves on the calling thread until stop().
  void listen();
  void stop();

 private:
  struct Http;
  bool authorized(const std::string& api_key) const;
  void log_gate(const GateLogEntry& entry);

  ServerConfig config_;
  std::vector<LabeledVolume> reference_set_;
  std::vector<Digest> key_digests_;
  mutable std::shared_mutex head_mu_;  // guards registry_ reads/writes
  std::mutex submit_mu_;               // one update at a time
  Registry registry_;
  mutable std::mutex log_mu_;
  std::vector<GateLogEntry> log_;
  std::unique_ptr<Http> http_;
};

struct ClientConfig {
  std::string host = "127.0.0.1";
  int port = 8750;
  std::string api_key;
  std::string client_id = "client";
  int retries = 3;
  std::chrono::milliseconds retry_delay{100};
  std::chrono::seconds timeout{30};
};

struct DownloadedModel {
  std::uint64_t version = 0;
  std::string checksum_hex;
  std::string created_at;
  double reference_dice = 0.0;
  ModelBundle bundle;
};

// Thin REST client over the /v1 protocol.
class FederationClient {
 public:
  explicit FederationClient(ClientConfig config);

  // Verifies the payload checksum (kIntegrity on mismatch). Network
  // failures retry then throw kNetwork; 404 throws kNotFound.
  DownloadedModel fetch_latest(const std::string& region) const;
  SubmitOutcome submit(const UpdateEnvelope& env) const;

  const ClientConfig& config() const { return config_; }

 private:
  ClientConfig config_;
};

struct RoundReport {
  std::uint64_t base_version = 0;
  SubmitOutcome outcome;
  std::uint64_t iterations = 0;
  double local_dice_before = 0.0;  // median ensemble Dice on the local volumes
  double local_dice_after = 0.0;
  ModelBundle local_bundle;
};

struct RoundOptions {
  IncrementalOptions training;
  double corruption_rate = 0.0;
  std::uint64_t seed = 0;
};

// Download head, annotate, train locally, submit, report the decision.
RoundReport run_il_round(const FederationClient& client, const std::string& region,
                         const std::vector<LabeledVolume>& local, const RoundOptions& options);

}  // namespace plexfed
