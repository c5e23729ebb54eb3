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

#include "plexfed/error.hpp"

namespace plexfed {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kTruncated: return "truncated";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kAuth: return "auth";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kStructural: return "structural";
    case ErrorCode::kInsufficientVolumes: return "insufficient_volumes";
    case ErrorCode::kNetwork: return "network";
    case ErrorCode::kChainBroken: return "chain_broken";
    case ErrorCode::kNonFinite: return "non_finite";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace plexfed
