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
#include "boxald/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace boxald {

bool BBox::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x2 > x1 && y2 > y1;
}

LabeledBox LabeledBox::from_distribution(const BBox& box, std::vector<double> dist) {
  LabeledBox out;
  out.box = box;
  const auto it = std::max_element(dist.begin(), dist.end());
  out.class_id = it == dist.end() ? 0 : static_cast<int>(it - dist.begin());
  out.confidence = it == dist.end() ? 0.0 : *it;
  out.score_dist = std::move(dist);
  return out;
}

bool valid_labeled_box(const LabeledBox& b, int num_classes) {
  if (!b.box.valid() || b.class_id < 0 || b.class_id >= num_classes) return false;
  if (b.score_dist.empty()) return true;
  if (static_cast<int>(b.score_dist.size()) != num_classes) return false;
  double sum = 0.0;
  for (double p : b.score_dist) {
    if (!(p >= 0.0)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= 1e-6;
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double areas = a.area() + b.area();
  return inter / (areas - inter);
}

std::vector<std::size_t> nms(std::span<const LabeledBox> dets, double iou_thresh, bool class_aware) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (class_aware && dets[k].class_id != dets[idx].class_id) continue;
      if (iou(dets[k].box, dets[idx].box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

BBox apply_view(const AffineView& v, const BBox& b) {
  double x1 = b.x1;
  double x2 = b.x2;
  if (v.hflip) {
    x1 = v.frame_width - b.x2;
    x2 = v.frame_width - b.x1;
  }
  return {x1 * v.scale + v.dx, b.y1 * v.scale + v.dy, x2 * v.scale + v.dx, b.y2 * v.scale + v.dy};
}

BBox invert_view(const AffineView& v, const BBox& b) {
  double x1 = (b.x1 - v.dx) / v.scale;
  double x2 = (b.x2 - v.dx) / v.scale;
  const double y1 = (b.y1 - v.dy) / v.scale;
  const double y2 = (b.y2 - v.dy) / v.scale;
  if (v.hflip) {
    const double fx1 = v.frame_width - x2;
    const double fx2 = v.frame_width - x1;
    x1 = fx1;
    x2 = fx2;
  }
  return {x1, y1, x2, y2};
}

namespace {

template <typename Get, typename SameClass>
Assignment assign_impl(std::size_t n_refs, std::size_t n_members, double tau_assign, Get get_iou,
                       SameClass same_class) {
  Assignment out;
  out.per_reference.resize(n_refs);
  out.member_to_reference.resize(n_members);
  for (std::size_t j = 0; j < n_members; ++j) {
    double best = -1.0;
    std::optional<std::size_t> best_ref;
    for (std::size_t i = 0; i < n_refs; ++i) {
      if (!same_class(i, j)) continue;
      const double v = get_iou(i, j);
      ++out.iou_evaluations;
      if (v > best) {
        best = v;
        best_ref = i;
      }
    }
    if (best_ref && best >= tau_assign) {
      out.member_to_reference[j] = best_ref;
      out.per_reference[*best_ref].push_back(j);
    }
  }
  return out;
}

}  // namespace

Assignment max_iou_assign(std::span<const BBox> references, std::span<const BBox> members,
                          double tau_assign) {
  return assign_impl(
      references.size(), members.size(), tau_assign,
      [&](std::size_t i, std::size_t j) { return iou(references[i], members[j]); },
      [](std::size_t, std::size_t) { return true; });
}

Assignment max_iou_assign(std::span<const LabeledBox> references,
                          std::span<const LabeledBox> members, double tau_assign,
                          bool class_aware) {
  return assign_impl(
      references.size(), members.size(), tau_assign,
      [&](std::size_t i, std::size_t j) { return iou(references[i].box, members[j].box); },
      [&](std::size_t i, std::size_t j) {
        return !class_aware || references[i].class_id == members[j].class_id;
      });
}

MembersToMembersAssignment members_to_members_assign(
    std::span<const std::vector<BBox>> member_sets, double tau_assign) {
  MembersToMembersAssignment out;
  out.matches.resize(member_sets.size());
  for (std::size_t m = 0; m < member_sets.size(); ++m) {
    out.matches[m].resize(member_sets[m].size());
    for (std::size_t j = 0; j < member_sets[m].size(); ++j) {
      for (std::size_t o = 0; o < member_sets.size(); ++o) {
        if (o == m) continue;
        double best = -1.0;
        std::optional<std::size_t> best_k;
        for (std::size_t k = 0; k < member_sets[o].size(); ++k) {
          const double v = iou(member_sets[m][j], member_sets[o][k]);
          ++out.iou_evaluations;
          if (v > best) {
            best = v;
            best_k = k;
          }
        }
        if (best_k && best >= tau_assign) out.matches[m][j].push_back({o, *best_k});
      }
    }
  }
  return out;
}

}  // namespace boxald
