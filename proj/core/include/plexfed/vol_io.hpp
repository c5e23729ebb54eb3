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
#include <span>
#include <variant>
#include <vector>

#include "plexfed/volume.hpp"

namespace plexfed {

// VOL1 container:
//   "VOL1" | u16 version | u32 header length | JSON header | payload | SHA-256
// Intensity payload is little-endian f32, mask payload is LSB-first packed
// bits padded to a byte; both x-fastest. The digest covers every prior byte.
inline constexpr std::uint16_t kVol1Version = 1;

std::vector<std::uint8_t> encode_vol1(const Volume& v);
std::vector<std::uint8_t> encode_vol1(const Mask& m);
// Errors: kFormat (magic/version/header), kTruncated, kChecksum.
std::variant<Volume, Mask> decode_vol1(std::span<const std::uint8_t> bytes);

void write_volume(const std::filesystem::path& path, const Volume& v);
void write_mask(const std::filesystem::path& path, const Mask& m);
Volume read_volume(const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace plexfed
