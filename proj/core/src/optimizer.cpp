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

#include "plexfed/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "plexfed/error.hpp"

namespace plexfed {

void adamw_step(AdamWState& state, std::span<double> weights, std::span<const double> grad) {
  require(weights.size() == grad.size() && state.m.size() == weights.size() && state.v.size() == weights.size(),
          ErrorCode::kInvalidArgument, "adamw_step shape mismatch");
  require(std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); }),
          ErrorCode::kNonFinite, "adamw_step received a non-finite gradient");
  const AdamWConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    weights[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * weights[i]);
  }
}

}  // namespace plexfed
