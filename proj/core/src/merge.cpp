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

#include "plexfed/merge.hpp"

#include <cmath>
#include <sstream>

#include "plexfed/error.hpp"
#include "plexfed/metrics.hpp"

namespace plexfed {

void MergePolicy::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorCode::kInvalidArgument, "merge alpha must lie in [0, 1]");
  require(epsilon_gate >= 0.0, ErrorCode::kInvalidArgument, "epsilon_gate must be >= 0");
}

ModelBundle merge(const ModelBundle& global, const ModelBundle& incoming, const MergePolicy& policy) {
  policy.validate();
  global.validate();
  incoming.validate();
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    require(global.slots[s].config == incoming.slots[s].config, ErrorCode::kStructural,
            "merge rejected: slot " + std::to_string(s) + " feature config differs");
  }
  ModelBundle out = global;
  for (std::size_t s = 0; s < kSlotCount; ++s) {
    auto& w = out.slots[s].weights;
    const auto& wi = incoming.slots[s].weights;
    if (policy.alpha == 0.0) {
      w = wi;
      continue;
    }
    if (policy.alpha == 1.0) continue;
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = policy.alpha * w[k] + (1.0 - policy.alpha) * wi[k];
  }
  const std::string global_hex = to_hex(bundle_checksum(global));
  const std::string incoming_hex = to_hex(bundle_checksum(incoming));
  out.version = incoming.version;
  out.parent_hash = global_hex;
  if (!incoming.provenance.empty() &&
      (global.provenance.empty() || !(incoming.provenance.back() == global.provenance.back()))) {
    out.provenance.push_back(incoming.provenance.back());
  }
  std::ostringstream note;
  note << "global=" << global_hex << ";incoming=" << incoming_hex << ";alpha=" << format_double(policy.alpha);
  TrainingEvent event;
  event.kind = TrainingKind::kMerge;
  event.note = note.str();
  out.provenance.push_back(std::move(event));
  return out;
}

double reference_dice(const ModelBundle& b, const std::vector<LabeledVolume>& reference_set) {
  require(!reference_set.empty(), ErrorCode::kInvalidArgument, "reference set must be non-empty");
  std::vector<double> scores;
  for (const auto& lv : reference_set) scores.push_back(dice(ensemble_predict(b, lv.image), lv.mask));
  return median_iqr(scores).median;
}

GateDecision validate_candidate(const ModelBundle& candidate, const std::vector<LabeledVolume>& reference_set,
                                double current_reference_dice, const MergePolicy& policy) {
  policy.validate();
  GateDecision d;
  d.current_dice = current_reference_dice;
  d.candidate_dice = reference_dice(candidate, reference_set);
  d.accepted = d.candidate_dice >= current_reference_dice - policy.epsilon_gate;
  d.reason = d.accepted ? "accepted" : "reference Dice regressed beyond epsilon_gate";
  return d;
}

}  // namespace plexfed
