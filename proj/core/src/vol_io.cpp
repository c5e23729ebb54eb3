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

#include "plexfed/vol_io.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "plexfed/error.hpp"
#include "plexfed/hashing.hpp"

namespace plexfed {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'V', 'O', 'L', '1'};

json header_for(const GridInfo& info, const char* kind) {
  json h;
  h["dims"] = {info.dims.nx, info.dims.ny, info.dims.nz};
  h["spacing_mm"] = {info.spacing.sx, info.spacing.sy, info.spacing.sz};
  h["dataset_id"] = info.dataset_id;
  h["subject_id"] = info.subject_id;
  h["seed"] = info.seed ? json(*info.seed) : json(nullptr);
  h["payload_kind"] = kind;
  return h;
}

std::vector<std::uint8_t> finish(const GridInfo& info, const char* kind,
                                 std::span<const std::uint8_t> payload) {
  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kVol1Version);
  w.str(header_for(info, kind).dump());
  w.bytes(payload);
  const Digest digest = sha256(w.data());
  w.bytes(digest);
  return w.take();
}

GridInfo grid_from(const json& h) {
  GridInfo info;
  try {
    const auto& dims = h.at("dims");
    const auto& sp = h.at("spacing_mm");
    require(dims.size() == 3 && sp.size() == 3, ErrorCode::kFormat, "VOL1 dims/spacing must have 3 entries");
    info.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
    info.spacing = {sp[0].get<double>(), sp[1].get<double>(), sp[2].get<double>()};
    info.dataset_id = h.at("dataset_id").get<std::string>();
    info.subject_id = h.at("subject_id").get<std::string>();
    if (!h.at("seed").is_null()) info.seed = h.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("VOL1 header: ") + e.what());
  }
  require(info.dims.nx > 0 && info.dims.ny > 0 && info.dims.nz > 0, ErrorCode::kFormat,
          "VOL1 dims must be positive");
  require(info.spacing.sx > 0 && info.spacing.sy > 0 && info.spacing.sz > 0, ErrorCode::kFormat,
          "VOL1 spacing must be positive");
  return info;
}

}  // namespace

std::vector<std::uint8_t> encode_vol1(const Volume& v) {
  validate(v);
  ByteWriter payload;
  for (float x : v.voxels) payload.f32(x);
  return finish(v.info, "intensity", payload.data());
}

std::vector<std::uint8_t> encode_vol1(const Mask& m) {
  validate(m);
  std::vector<std::uint8_t> packed((m.labels.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (m.labels[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return finish(m.info, "mask", packed);
}

std::variant<Volume, Mask> decode_vol1(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::kFormat,
          "not a VOL1 file (bad magic)");
  ByteReader r(bytes.subspan(4));
  const auto version = r.u16();
  require(version == kVol1Version, ErrorCode::kFormat, "unsupported VOL1 version " + std::to_string(version));
  const std::string header_text = r.str();
  json h;
  try {
    h = json::parse(header_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("VOL1 header is not JSON: ") + e.what());
  }
  GridInfo info = grid_from(h);
  const std::string kind = h.value("payload_kind", "");
  require(kind == "intensity" || kind == "mask", ErrorCode::kFormat, "unknown VOL1 payload kind");
  const std::size_t n = info.dims.count();
  const std::size_t payload_size = kind == "intensity" ? 4 * n : (n + 7) / 8;
  require(r.remaining() >= payload_size + 32, ErrorCode::kTruncated, "VOL1 file is truncated");
  require(r.remaining() == payload_size + 32, ErrorCode::kFormat, "VOL1 file has trailing bytes");

  const std::size_t body = bytes.size() - 32;
  const Digest actual = sha256(bytes.first(body));
  require(std::memcmp(actual.data(), bytes.data() + body, 32) == 0, ErrorCode::kChecksum,
          "VOL1 checksum mismatch");

  if (kind == "intensity") {
    Volume v(info);
    for (std::size_t i = 0; i < n; ++i) v.voxels[i] = r.f32();
    return v;
  }
  Mask m(info);
  auto packed = r.bytes(payload_size);
  for (std::size_t i = 0; i < n; ++i) m.labels[i] = (packed[i / 8] >> (i % 8)) & 1u;
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed for " + path.string());
}

void write_volume(const std::filesystem::path& path, const Volume& v) { write_file(path, encode_vol1(v)); }
void write_mask(const std::filesystem::path& path, const Mask& m) { write_file(path, encode_vol1(m)); }

Volume read_volume(const std::filesystem::path& path) {
  auto decoded = decode_vol1(read_file(path));
  require(std::holds_alternative<Volume>(decoded), ErrorCode::kFormat, path.string() + " holds a mask, not an intensity volume");
  return std::get<Volume>(std::move(decoded));
}

Mask read_mask(const std::filesystem::path& path) {
  auto decoded = decode_vol1(read_file(path));
  require(std::holds_alternative<Mask>(decoded), ErrorCode::kFormat, path.string() + " holds an intensity volume, not a mask");
  return std::get<Mask>(std::move(decoded));
}

}  // namespace plexfed
