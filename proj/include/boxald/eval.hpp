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

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boxald/dataset.hpp"
#include "boxald/geometry.hpp"

namespace boxald {

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

struct ImageDetections {
  ImageId image_id = 0;
  std::vector<LabeledBox> boxes;
};

// Greedy matching in descending confidence (ties by input order, images
// first). Returns nullopt when the class has no ground truth.
std::optional<std::vector<PrPoint>> pr_curve(std::span<const ImageDetections> predictions,
                                             std::span<const ImageDetections> ground_truths,
                                             double iou_thresh, int class_id);

enum class ApMode { kAllPoint, k101Point };

// Precision made non-increasing in recall, from the right.
std::vector<double> precision_envelope(std::span<const PrPoint> points);

double average_precision(std::span<const PrPoint> points, ApMode mode);

struct ClassEval {
  int class_id = 0;
  std::size_t n_ground_truth = 0;
  double ap50 = 0.0;                     // all-point AP at IoU 0.5
  std::vector<double> ap101;             // 101-point AP per IoU threshold
  std::vector<PrPoint> pr50;
};

struct EvalResult {
  std::vector<double> iou_thresholds;  // 0.50, 0.55, ..., 0.95
  std::vector<ClassEval> classes;      // classes with at least one ground truth
  double map50 = 0.0;
  double map5095 = 0.0;
};

std::vector<double> coco_iou_thresholds();

EvalResult map_scores(std::span<const ImageDetections> predictions,
                      std::span<const ImageDetections> ground_truths, int num_classes);

struct ScoreSample {
  int cycle = 0;
  std::string split;
  double score = 0.0;
};

struct ScoreSummary {
  int cycle = 0;
  std::string split;
  std::size_t count = 0;
  std::array<double, 5> quantiles{};  // min, q1, median, q3, max
};

// Order statistics at floor((n - 1) * q).
std::array<double, 5> five_number_summary(std::vector<double> values);

// One summary per (cycle, split) in first-seen order.
std::vector<ScoreSummary> summarize_scores(std::span<const ScoreSample> samples);

// Tab-separated "cycle split score" rows for violin plots.
void export_score_distribution(std::ostream& out, std::span<const ScoreSample> samples);
void export_score_summary(std::ostream& out, std::span<const ScoreSummary> summaries);

}  // namespace boxald
