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
#include <optional>
#include <string>
#include <vector>

#include "plexfed/bundle.hpp"
#include "plexfed/error.hpp"
#include "plexfed/hashing.hpp"

namespace plexfed {

struct ModelVersion {
  std::uint64_t version = 0;  // 1-based, strictly increasing per region
  std::string region;
  ModelBundle bundle;
  std::vector<std::uint8_t> payload;  // canonical bundle serialization
  Digest checksum{};                  // SHA-256 of payload
  Digest parent_hash{};               // record hash of the previous version, zero for v1
  Digest record_hash{};               // SHA-256 of this record's encoded bytes
  std::string created_at;             // ISO-8601 UTC
  double reference_dice = 0.0;

  bool operator==(const ModelVersion&) const = default;
};

// Raised by Registry::load; bad_version() names the first record that failed.
class RegistryLoadError : public Error {
 public:
  RegistryLoadError(std::uint64_t bad_version, const std::string& message)
      : Error(ErrorCode::kChainBroken, message), bad_version_(bad_version) {}
  std::uint64_t bad_version() const noexcept { return bad_version_; }

 private:
  std::uint64_t bad_version_;
};

// Append-only, hash-linked chain of model versions per region. When bound
// to a directory every append is also written to <dir>/<region>.log.
class Registry {
 public:
  Registry() = default;
  explicit Registry(std::filesystem::path dir);

  // Reads and re-verifies every chain found in `dir`; a missing or empty
  // directory gives an empty registry bound to `dir`.
  static Registry load(const std::filesystem::path& dir);

  // Writes every chain to `dir` (full rewrite of each region log).
  void persist(const std::filesystem::path& dir) const;

  const ModelVersion& append(const std::string& region, const ModelBundle& bundle, double reference_dice,
                             std::string created_at = {});

  bool has_region(const std::string& region) const { return chains_.count(region) > 0; }
  // Throws kNotFound for an unknown region.
  const ModelVersion& head(const std::string& region) const;
  const std::vector<ModelVersion>& chain(const std::string& region) const;
  std::vector<std::string> regions() const;
  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  std::map<std::string, std::vector<ModelVersion>> chains_;
  std::optional<std::filesystem::path> dir_;
};

std::vector<std::uint8_t> encode_record(const ModelVersion& v);
std::string utc_now_iso8601();

}  // namespace plexfed
