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
#include "boxald/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace boxald {

std::optional<std::vector<PrPoint>> pr_curve(std::span<const ImageDetections> predictions,
                                             std::span<const ImageDetections> ground_truths,
                                             double iou_thresh, int class_id) {
  std::map<ImageId, std::vector<const LabeledBox*>> gt_by_image;
  std::size_t n_gt = 0;
  for (const auto& img : ground_truths) {
    for (const auto& g : img.boxes) {
      if (g.class_id != class_id) continue;
      gt_by_image[img.image_id].push_back(&g);
      ++n_gt;
    }
  }
  if (n_gt == 0) return std::nullopt;

  struct Det {
    ImageId image;
    const LabeledBox* box;
  };
  std::vector<Det> dets;
  for (const auto& img : predictions) {
    for (const auto& p : img.boxes) {
      if (p.class_id == class_id) dets.push_back({img.image_id, &p});
    }
  }
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Det& a, const Det& b) { return a.box->confidence > b.box->confidence; });

  std::map<ImageId, std::vector<bool>> used;
  for (const auto& [id, gts] : gt_by_image) used[id].assign(gts.size(), false);

  std::vector<PrPoint> points;
  points.reserve(dets.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < dets.size(); ++rank) {
    const Det& d = dets[rank];
    const auto it = gt_by_image.find(d.image);
    if (it != gt_by_image.end()) {
      auto& taken = used[d.image];
      double best = -1.0;
      std::optional<std::size_t> best_g;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(d.box->box, it->second[g]->box);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      if (best_g && best >= iou_thresh) {
        taken[*best_g] = true;
        ++tp;
      }
    }
    points.push_back({static_cast<double>(tp) / static_cast<double>(rank + 1),
                      static_cast<double>(tp) / static_cast<double>(n_gt)});
  }
  return points;
}

std::vector<double> precision_envelope(std::span<const PrPoint> points) {
  std::vector<double> env(points.size());
  double running = 0.0;
  for (std::size_t i = points.size(); i-- > 0;) {
    running = std::max(running, points[i].precision);
    env[i] = running;
  }
  return env;
}

double average_precision(std::span<const PrPoint> points, ApMode mode) {
  if (points.empty()) return 0.0;
  const auto env = precision_envelope(points);
  if (mode == ApMode::kAllPoint) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      ap += (points[i].recall - prev_recall) * env[i];
      prev_recall = points[i].recall;
    }
    return ap;
  }
  double sum = 0.0;
  std::size_t cursor = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    while (cursor < points.size() && points[cursor].recall < r - 1e-12) ++cursor;
    if (cursor < points.size()) sum += env[cursor];
  }
  return sum / 101.0;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(0.5 + 0.05 * k);
  return t;
}

EvalResult map_scores(std::span<const ImageDetections> predictions,
                      std::span<const ImageDetections> ground_truths, int num_classes) {
  EvalResult result;
  result.iou_thresholds = coco_iou_thresholds();
  for (int c = 0; c < num_classes; ++c) {
    auto pr = pr_curve(predictions, ground_truths, 0.5, c);
    if (!pr) continue;
    ClassEval ce;
    ce.class_id = c;
    for (const auto& img : ground_truths) {
      ce.n_ground_truth += static_cast<std::size_t>(std::count_if(
          img.boxes.begin(), img.boxes.end(), [&](const LabeledBox& b) { return b.class_id == c; }));
    }
    ce.ap50 = average_precision(*pr, ApMode::kAllPoint);
    for (double t : result.iou_thresholds) {
      const auto curve = pr_curve(predictions, ground_truths, t, c);
      ce.ap101.push_back(average_precision(*curve, ApMode::k101Point));
    }
    ce.pr50 = std::move(*pr);
    result.classes.push_back(std::move(ce));
  }
  if (!result.classes.empty()) {
    double s50 = 0.0;
    double s5095 = 0.0;
    for (const auto& ce : result.classes) {
      s50 += ce.ap50;
      s5095 += std::accumulate(ce.ap101.begin(), ce.ap101.end(), 0.0) / static_cast<double>(ce.ap101.size());
    }
    const double n = static_cast<double>(result.classes.size());
    result.map50 = s50 / n;
    result.map5095 = s5095 / n;
  }
  return result;
}

std::array<double, 5> five_number_summary(std::vector<double> values) {
  std::array<double, 5> q{};
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  const double last = static_cast<double>(values.size() - 1);
  const double fractions[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 5; ++i) {
    q[i] = values[static_cast<std::size_t>(std::floor(last * fractions[i] + 1e-9))];
  }
  return q;
}

std::vector<ScoreSummary> summarize_scores(std::span<const ScoreSample> samples) {
  std::vector<ScoreSummary> out;
  std::vector<std::vector<double>> values;
  for (const auto& s : samples) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].cycle == s.cycle && out[k].split == s.split)) ++k;
    if (k == out.size()) {
      out.push_back({s.cycle, s.split, 0, {}});
      values.emplace_back();
    }
    values[k].push_back(s.score);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].count = values[k].size();
    out[k].quantiles = five_number_summary(std::move(values[k]));
  }
  return out;
}

void export_score_distribution(std::ostream& out, std::span<const ScoreSample> samples) {
  out << "cycle\tsplit\tscore\n";
  const auto old = out.precision(10);
  for (const auto& s : samples) out << s.cycle << '\t' << s.split << '\t' << s.score << '\n';
  out.precision(old);
}

void export_score_summary(std::ostream& out, std::span<const ScoreSummary> summaries) {
  out << "cycle\tsplit\tcount\tmin\tq1\tmedian\tq3\tmax\n";
  const auto old = out.precision(10);
  for (const auto& s : summaries) {
    out << s.cycle << '\t' << s.split << '\t' << s.count;
    for (double q : s.quantiles) out << '\t' << q;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace boxald
