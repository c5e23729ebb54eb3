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

#include "plexfed/registry.hpp"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <json.hpp>

#include "plexfed/vol_io.hpp"

namespace plexfed {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr char kRecordMagic[4] = {'P', 'F', 'R', '1'};
constexpr const char* kLogSuffix = ".log";

std::vector<std::uint8_t> record_body(const ModelVersion& v) {
  json meta;
  meta["version"] = v.version;
  meta["region"] = v.region;
  meta["parent_hash"] = to_hex(v.parent_hash);
  meta["checksum"] = to_hex(v.checksum);
  meta["created_at"] = v.created_at;
  meta["reference_dice"] = v.reference_dice;
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kRecordMagic), 4));
  w.str(meta.dump());
  w.u64(v.payload.size());
  w.bytes(v.payload);
  return w.take();
}

fs::path log_path(const fs::path& dir, const std::string& region) { return dir / (region + kLogSuffix); }

void append_to_log(const fs::path& dir, const ModelVersion& v) {
  fs::create_directories(dir);
  std::ofstream out(log_path(dir, v.region), std::ios::binary | std::ios::app);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open registry log for " + v.region);
  const auto bytes = encode_record(v);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(static_cast<bool>(out), ErrorCode::kIo, "registry append failed for " + v.region);
}

std::vector<ModelVersion> read_chain(const fs::path& file, const std::string& region) {
  const auto bytes = read_file(file);
  std::vector<ModelVersion> chain;
  std::size_t pos = 0;
  Digest prev{};
  while (pos < bytes.size()) {
    const std::uint64_t expected = chain.size() + 1;
    auto bad = [&](const std::string& what) {
      throw RegistryLoadError(expected, "registry " + region + ": version " + std::to_string(expected) + " " + what);
    };
    const std::span<const std::uint8_t> rest(bytes.data() + pos, bytes.size() - pos);
    ModelVersion v;
    json meta;
    std::size_t body_len = 0;
    try {
      require(rest.size() >= 4 && std::memcmp(rest.data(), kRecordMagic, 4) == 0, ErrorCode::kFormat, "bad magic");
      ByteReader r(rest.subspan(4));
      meta = json::parse(r.str());
      const auto payload_len = r.u64();
      auto payload = r.bytes(payload_len);
      v.payload.assign(payload.begin(), payload.end());
      body_len = 4 + r.offset();
      r.bytes(32);
    } catch (const Error& e) {
      bad(e.code() == ErrorCode::kTruncated ? "is truncated" : std::string("is malformed: ") + e.what());
    } catch (const json::exception& e) {
      bad(std::string("has an unreadable header: ") + e.what());
    }
    const Digest record_hash = sha256(rest.first(body_len));
    if (std::memcmp(record_hash.data(), rest.data() + body_len, 32) != 0) bad("fails its record hash");
    try {
      v.version = meta.at("version").get<std::uint64_t>();
      v.region = meta.at("region").get<std::string>();
      v.parent_hash = digest_from_hex(meta.at("parent_hash").get<std::string>());
      v.checksum = digest_from_hex(meta.at("checksum").get<std::string>());
      v.created_at = meta.at("created_at").get<std::string>();
      v.reference_dice = meta.at("reference_dice").get<double>();
    } catch (const std::exception& e) {
      bad(std::string("has invalid metadata: ") + e.what());
    }
    if (v.version != expected) bad("is out of sequence (found " + std::to_string(v.version) + ")");
    if (v.region != region) bad("belongs to region " + v.region);
    if (sha256(v.payload) != v.checksum) bad("payload checksum mismatch");
    if (v.parent_hash != prev) bad("does not link to its parent record");
    try {
      v.bundle = deserialize(v.payload);
    } catch (const Error& e) {
      bad(std::string("payload does not decode: ") + e.what());
    }
    v.record_hash = record_hash;
    prev = record_hash;
    pos += body_len + 32;
    chain.push_back(std::move(v));
  }
  return chain;
}

}  // namespace

std::vector<std::uint8_t> encode_record(const ModelVersion& v) {
  auto body = record_body(v);
  const Digest h = sha256(body);
  body.insert(body.end(), h.begin(), h.end());
  return body;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Registry::Registry(std::filesystem::path dir) : dir_(std::move(dir)) {}

Registry Registry::load(const std::filesystem::path& dir) {
  Registry reg(dir);
  if (!fs::exists(dir)) return reg;
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == kLogSuffix) logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& file : logs) {
    const std::string region = file.stem().string();
    auto chain = read_chain(file, region);
    if (!chain.empty()) reg.chains_[region] = std::move(chain);
  }
  return reg;
}

void Registry::persist(const std::filesystem::path& dir) const {
  fs::create_directories(dir);
  for (const auto& [region, chain] : chains_) {
    std::ofstream out(log_path(dir, region), std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIo, "cannot write registry log for " + region);
    for (const auto& v : chain) {
      const auto bytes = encode_record(v);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    require(static_cast<bool>(out), ErrorCode::kIo, "registry persist failed for " + region);
  }
}

const ModelVersion& Registry::append(const std::string& region, const ModelBundle& bundle, double reference_dice,
                                     std::string created_at) {
  auto& chain = chains_[region];
  ModelVersion v;
  v.version = chain.size() + 1;
  v.region = region;
  v.bundle = bundle;
  v.payload = serialize(bundle);
  v.checksum = sha256(v.payload);
  v.parent_hash = chain.empty() ? Digest{} : chain.back().record_hash;
  v.created_at = created_at.empty() ? utc_now_iso8601() : std::move(created_at);
  v.reference_dice = reference_dice;
  v.record_hash = sha256(record_body(v));
  if (dir_) append_to_log(*dir_, v);
  chain.push_back(std::move(v));
  return chain.back();
}

const ModelVersion& Registry::head(const std::string& region) const { return chain(region).back(); }

const std::vector<ModelVersion>& Registry::chain(const std::string& region) const {
  auto it = chains_.find(region);
  require(it != chains_.end() && !it->second.empty(), ErrorCode::kNotFound, "unknown region '" + region + "'");
  return it->second;
}

std::vector<std::string> Registry::regions() const {
  std::vector<std::string> out;
  for (const auto& [region, chain] : chains_) out.push_back(region);
  return out;
}

}  // namespace plexfed
