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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plexfed/hashing.hpp"
#include "plexfed/segmenter.hpp"

namespace plexfed {

inline constexpr std::size_t kSlotCount = 5;
inline constexpr std::string_view kRegion = "choroid_plexus";

enum class TrainingKind : std::uint8_t {
  kInitial = 0,
  kFineTune = 1,
  kIncremental = 2,
  kMerge = 3,
};

std::string_view to_string(TrainingKind k);

struct TrainingEvent {
  TrainingKind kind = TrainingKind::kInitial;
  std::vector<std::string> datasets;
  std::uint64_t iterations = 0;  // per-slot iteration budget
  std::uint64_t seed = 0;
  std::array<double, kSlotCount> slot_val_dice{};
  std::string note;

  bool operator==(const TrainingEvent&) const = default;
};

// The unit of exchange: five segmenters, majority-voted.
struct ModelBundle {
  std::array<SegmenterParams, kSlotCount> slots;
  std::string region{kRegion};
  std::string version;
  std::string parent_hash;  // hex, empty for a root model
  std::vector<TrainingEvent> provenance;

  void validate() const;
  bool operator==(const ModelBundle&) const = default;
};

// Canonical little-endian serialization ("PFB1"). Per slot: config id,
// feature names, radius, init seed, then the weights as f64 in order.
std::vector<std::uint8_t> serialize(const ModelBundle& b);
// Throws kFormat or kTruncated.
ModelBundle deserialize(std::span<const std::uint8_t> bytes);
Digest bundle_checksum(const ModelBundle& b);

// Label 1 iff at least three of the five slots predict foreground at 0.5.
Mask ensemble_predict(const ModelBundle& b, const Volume& v);
// Per-voxel majority over exactly five binary masks.
Mask majority_vote(std::span<const Mask> votes);

}  // namespace plexfed
