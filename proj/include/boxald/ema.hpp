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
#pragma once

#include <cstdint>
#include <vector>

namespace boxald {

struct ParamVector {
  std::vector<double> values;
  std::uint64_t step = 0;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

inline constexpr double kDefaultEmaAlpha = 0.999;

// chairman <- alpha * chairman + (1 - alpha) * detector, step + 1.
// Throws DimensionError on length mismatch, ConfigError on alpha outside [0, 1].
ParamVector ema_update(const ParamVector& chairman, const ParamVector& detector, double alpha);

// Applies `steps` consecutive updates against a fixed detector vector.
ParamVector ema_update_n(ParamVector chairman, const ParamVector& detector, double alpha,
                         std::uint64_t steps);

}  // namespace boxald
