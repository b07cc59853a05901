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

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace boxald {

// Axis-aligned box in corner form, pixel coordinates, top-left origin.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const;

  // COCO (x, y, w, h) conversion.
  static BBox from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct LabeledBox {
  BBox box;
  int class_id = 0;
  std::vector<double> score_dist;  // empty for plain ground truth
  double confidence = 1.0;

  // Builds a prediction whose class is the argmax of `dist` and whose
  // confidence is the max probability.
  static LabeledBox from_distribution(const BBox& box, std::vector<double> dist);

  friend bool operator==(const LabeledBox&, const LabeledBox&) = default;
};

// Checks the LabeledBox invariants against a vocabulary of `num_classes`.
bool valid_labeled_box(const LabeledBox& b, int num_classes);

// Invertible geometric view: optional horizontal flip about the frame, then
// uniform scale, then translation.
struct AffineView {
  bool hflip = false;
  double scale = 1.0;
  double dx = 0.0;
  double dy = 0.0;
  double frame_width = 1.0;

  static AffineView identity(double frame_width) { return {false, 1.0, 0.0, 0.0, frame_width}; }

  friend bool operator==(const AffineView&, const AffineView&) = default;
};

// Intersection over union; touching boxes have IoU 0.
double iou(const BBox& a, const BBox& b);

std::vector<std::size_t> nms(std::span<const LabeledBox> dets, double iou_thresh, bool class_aware);

BBox apply_view(const AffineView& v, const BBox& b);
BBox invert_view(const AffineView& v, const BBox& b);

struct Assignment {
  // per_reference[i] lists member indices assigned to reference i, ascending.
  std::vector<std::vector<std::size_t>> per_reference;
  // member_to_reference[j] is the reference index of member j, if any.
  std::vector<std::optional<std::size_t>> member_to_reference;
  std::size_t iou_evaluations = 0;
};

// Each member goes to its max-IoU reference when that IoU >= tau_assign.
// Ties go to the lower reference index. When class ids are supplied and
// class_aware is set, only same-class pairs are considered.
Assignment max_iou_assign(std::span<const BBox> references, std::span<const BBox> members,
                          double tau_assign);
Assignment max_iou_assign(std::span<const LabeledBox> references,
                          std::span<const LabeledBox> members, double tau_assign,
                          bool class_aware);

// All-pairs committee construction without a reference set: every box of
// every member set is matched against the boxes of all other member sets.
// result[m][j] holds (other set, box index) pairs with max IoU >= tau_assign
// in each other set. Used to compare assignment cost against the
// chairman-reference scheme.
struct CrossMatch {
  std::size_t member_set = 0;
  std::size_t index = 0;
};
struct MembersToMembersAssignment {
  std::vector<std::vector<std::vector<CrossMatch>>> matches;
  std::size_t iou_evaluations = 0;
};
MembersToMembersAssignment members_to_members_assign(
    std::span<const std::vector<BBox>> member_sets, double tau_assign);

}  // namespace boxald
