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
// Independent reference implementations and generators shared by the unit
// tests and the acceptance binary. Nothing here calls the code it checks
// except where noted.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "boxald/eval.hpp"
#include "boxald/geometry.hpp"

namespace oracle {

using boxald::BBox;
using boxald::LabeledBox;

// IoU by counting cell centres of a grid with spacing `step`.
inline double raster_iou(const BBox& a, const BBox& b, double step) {
  const double x0 = std::min(a.x1, b.x1), x1 = std::max(a.x2, b.x2);
  const double y0 = std::min(a.y1, b.y1), y1 = std::max(a.y2, b.y2);
  auto inside = [](const BBox& r, double x, double y) { return x > r.x1 && x < r.x2 && y > r.y1 && y < r.y2; };
  std::size_t inter = 0, uni = 0;
  for (double y = y0 + step / 2; y < y1; y += step) {
    for (double x = x0 + step / 2; x < x1; x += step) {
      const bool ia = inside(a, x, y), ib = inside(b, x, y);
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Closed-form IoU written out independently of the library.
inline double hand_iou(const BBox& a, const BBox& b) {
  const double w = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double h = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double i = w * h;
  const double u = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - i;
  return i <= 0.0 ? 0.0 : i / u;
}

// Pick-and-remove NMS: take the most confident survivor (lowest index on
// ties), then delete everything it overlaps above the threshold.
inline std::vector<std::size_t> brute_nms(const std::vector<LabeledBox>& d, double thresh, bool class_aware) {
  std::vector<bool> alive(d.size(), true);
  std::vector<std::size_t> kept;
  for (;;) {
    std::optional<std::size_t> top;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (alive[i] && (!top || d[i].confidence > d[*top].confidence)) top = i;
    }
    if (!top) break;
    kept.push_back(*top);
    alive[*top] = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!alive[i]) continue;
      if (class_aware && d[i].class_id != d[*top].class_id) continue;
      if (hand_iou(d[i].box, d[*top].box) > thresh) alive[i] = false;
    }
  }
  return kept;
}

// Full IoU matrix, then a row argmax per member.
inline std::vector<std::vector<std::size_t>> brute_assign(const std::vector<BBox>& refs,
                                                          const std::vector<BBox>& members, double tau) {
  std::vector<std::vector<double>> m(members.size(), std::vector<double>(refs.size()));
  for (std::size_t j = 0; j < members.size(); ++j) {
    for (std::size_t i = 0; i < refs.size(); ++i) m[j][i] = hand_iou(refs[i], members[j]);
  }
  std::vector<std::vector<std::size_t>> out(refs.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (refs.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < refs.size(); ++i) {
      if (m[j][i] > m[j][best]) best = i;
    }
    if (m[j][best] >= tau) out[best].push_back(j);
  }
  return out;
}

// Area under the interpolated precision curve by a midpoint Riemann sum.
inline double dense_ap(const std::vector<boxald::PrPoint>& pts, std::size_t samples) {
  double area = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double r = (static_cast<double>(s) + 0.5) / static_cast<double>(samples);
    double p = 0.0;
    for (const auto& pt : pts) {
      if (pt.recall >= r) p = std::max(p, pt.precision);
    }
    area += p;
  }
  return area / static_cast<double>(samples);
}

inline BBox random_box(std::mt19937_64& g, double extent, double min_side, double max_side) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(g), h = side(g);
  std::uniform_real_distribution<double> px(0.0, extent - w), py(0.0, extent - h);
  const double x = px(g), y = py(g);
  return {x, y, x + w, y + h};
}

inline std::vector<double> random_distribution(std::mt19937_64& g, int classes) {
  std::gamma_distribution<double> ga(1.0, 1.0);
  std::vector<double> d(static_cast<std::size_t>(classes));
  double s = 0.0;
  for (auto& v : d) s += v = ga(g) + 1e-9;
  for (auto& v : d) v /= s;
  return d;
}

inline LabeledBox random_detection(std::mt19937_64& g, double extent, int classes) {
  return LabeledBox::from_distribution(random_box(g, extent, 5.0, 40.0), random_distribution(g, classes));
}

}  // namespace oracle
