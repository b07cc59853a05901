/**
 * Copyright 2026 The boxald Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "boxald/ema.hpp"

#include <cmath>
#include <string>

#include "boxald/errors.hpp"

namespace boxald {

ParamVector ema_update(const ParamVector& chairman, const ParamVector& detector, double alpha) {
  if (chairman.values.size() != detector.values.size()) {
    throw DimensionError("ema_update: chairman has " + std::to_string(chairman.values.size()) +
                         " values, detector has " + std::to_string(detector.values.size()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("ema_update: alpha must lie in [0, 1]");
  ParamVector out;
  out.step = chairman.step + 1;
  out.values.resize(chairman.values.size());
  for (std::size_t i = 0; i < chairman.values.size(); ++i) {
    out.values[i] = alpha * chairman.values[i] + (1.0 - alpha) * detector.values[i];
  }
  return out;
}

ParamVector ema_update_n(ParamVector chairman, const ParamVector& detector, double alpha,
                         std::uint64_t steps) {
  for (std::uint64_t s = 0; s < steps; ++s) chairman = ema_update(chairman, detector, alpha);
  return chairman;
}

}  // namespace boxald
