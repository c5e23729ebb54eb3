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
#include <span>
#include <vector>

namespace plexfed {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamWState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment, entrywise >= 0

  AdamWState() = default;
  AdamWState(std::size_t n, AdamWConfig cfg = {}) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam step with decoupled weight decay:
//   w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * w)
// Throws kNonFinite for a non-finite gradient and kInvalidArgument on shape
// mismatch; neither state nor weights change on error.
void adamw_step(AdamWState& state, std::span<double> weights, std::span<const double> grad);

}  // namespace plexfed
