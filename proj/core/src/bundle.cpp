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

#include "plexfed/bundle.hpp"

#include <cstring>
#include <map>

#include "plexfed/error.hpp"

namespace plexfed {

std::string_view to_string(TrainingKind k) {
  switch (k) {
    case TrainingKind::kInitial: return "initial";
    case TrainingKind::kFineTune: return "finetune";
    case TrainingKind::kIncremental: return "incremental";
    case TrainingKind::kMerge: return "merge";
  }
  return "unknown";
}

void ModelBundle::validate() const {
  for (const auto& s : slots) s.validate();
}

namespace {

constexpr char kMagic[4] = {'P', 'F', 'B', '1'};
constexpr std::uint16_t kFormatVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize(const ModelBundle& b) {
  b.validate();
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kFormatVersion);
  w.str(b.region);
  w.str(b.version);
  w.str(b.parent_hash);
  w.u32(static_cast<std::uint32_t>(kSlotCount));
  for (const auto& s : b.slots) {
    w.str(s.config.config_id);
    w.u32(static_cast<std::uint32_t>(s.config.features.size()));
    for (auto f : s.config.features) w.str(to_string(f));
    w.u32(static_cast<std::uint32_t>(s.config.radius));
    w.u64(s.init_seed);
    w.u32(static_cast<std::uint32_t>(s.weights.size()));
    for (double x : s.weights) w.f64(x);
  }
  w.u32(static_cast<std::uint32_t>(b.provenance.size()));
  for (const auto& e : b.provenance) {
    w.u8(static_cast<std::uint8_t>(e.kind));
    w.u32(static_cast<std::uint32_t>(e.datasets.size()));
    for (const auto& d : e.datasets) w.str(d);
    w.u64(e.iterations);
    w.u64(e.seed);
    for (double d : e.slot_val_dice) w.f64(d);
    w.str(e.note);
  }
  return w.take();
}

ModelBundle deserialize(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kFormat,
          "not a model bundle (bad magic)");
  ByteReader r(bytes.subspan(4));
  require(r.u16() == kFormatVersion, ErrorCode::kFormat, "unsupported bundle format version");
  ModelBundle b;
  b.region = r.str();
  b.version = r.str();
  b.parent_hash = r.str();
  require(r.u32() == kSlotCount, ErrorCode::kFormat, "bundle must have exactly five slots");
  for (auto& s : b.slots) {
    s.config.config_id = r.str();
    const auto nf = r.u32();
    require(nf <= 64, ErrorCode::kFormat, "implausible feature count");
    for (std::uint32_t i = 0; i < nf; ++i) s.config.features.push_back(feature_from_string(r.str()));
    s.config.radius = static_cast<int>(r.u32());
    s.init_seed = r.u64();
    const auto nw = r.u32();
    require(nw == nf + 1, ErrorCode::kFormat, "weight count must be |features| + 1");
    s.weights.resize(nw);
    for (auto& x : s.weights) x = r.f64();
  }
  const auto ne = r.u32();
  require(ne <= r.remaining(), ErrorCode::kTruncated, "provenance log is truncated");
  for (std::uint32_t i = 0; i < ne; ++i) {
    TrainingEvent e;
    const auto kind = r.u8();
    require(kind <= static_cast<std::uint8_t>(TrainingKind::kMerge), ErrorCode::kFormat, "unknown training kind");
    e.kind = static_cast<TrainingKind>(kind);
    const auto nd = r.u32();
    require(nd <= r.remaining(), ErrorCode::kTruncated, "dataset list is truncated");
    for (std::uint32_t j = 0; j < nd; ++j) e.datasets.push_back(r.str());
    e.iterations = r.u64();
    e.seed = r.u64();
    for (auto& d : e.slot_val_dice) d = r.f64();
    e.note = r.str();
    b.provenance.push_back(std::move(e));
  }
  require(r.remaining() == 0, ErrorCode::kFormat, "trailing bytes after bundle");
  try {
    b.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, std::string("invalid bundle payload: ") + e.what());
  }
  return b;
}

Digest bundle_checksum(const ModelBundle& b) { return sha256(serialize(b)); }

Mask majority_vote(std::span<const Mask> votes) {
  require(votes.size() == kSlotCount, ErrorCode::kInvalidArgument, "majority vote needs five masks");
  Mask out(votes[0].info);
  for (const auto& m : votes) {
    require(m.info.same_grid(out.info), ErrorCode::kInvalidArgument, "vote masks differ in grid");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    int count = 0;
    for (const auto& m : votes) count += m.labels[i];
    out.labels[i] = count >= 3 ? 1 : 0;
  }
  return out;
}

Mask ensemble_predict(const ModelBundle& b, const Volume& v) {
  b.validate();
  // Slots that share a feature config share one extraction.
  std::map<std::size_t, FeatureMap> cache;
  std::vector<Mask> votes;
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    std::size_t key = s;
    for (std::size_t t = 0; t < s; ++t) {
      if (b.slots[t].config == b.slots[s].config) {
        key = t;
        break;
      }
    }
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, extract_features(v, b.slots[s].config)).first;
    votes.push_back(binarize(predict_probs(b.slots[s], it->second), v.info));
  }
  Mask out = majority_vote(votes);
  return out;
}

}  // namespace plexfed
