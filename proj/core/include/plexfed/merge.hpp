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

#include <string>
#include <vector>

#include "plexfed/bundle.hpp"

namespace plexfed {

struct MergePolicy {
  double alpha = 0.5;          // weight of the pre-existing global model
  double epsilon_gate = 0.02;  // tolerated reference-Dice regression

  void validate() const;
};

// Slot-wise alpha * global + (1 - alpha) * incoming. Throws kStructural when
// any slot's feature config differs.
ModelBundle merge(const ModelBundle& global, const ModelBundle& incoming, const MergePolicy& policy);

// Median ensemble Dice over a labelled reference set.
double reference_dice(const ModelBundle& b, const std::vector<LabeledVolume>& reference_set);

struct GateDecision {
  bool accepted = false;
  double candidate_dice = 0.0;
  double current_dice = 0.0;
  std::string reason;
};

// Accepts iff candidate median Dice >= current_reference_dice - epsilon_gate.
GateDecision validate_candidate(const ModelBundle& candidate, const std::vector<LabeledVolume>& reference_set,
                                double current_reference_dice, const MergePolicy& policy);

}  // namespace plexfed
