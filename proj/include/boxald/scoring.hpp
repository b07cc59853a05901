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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "boxald/dataset.hpp"
#include "boxald/geometry.hpp"
#include "boxald/rng.hpp"

namespace boxald {

// Pluggable detector surface. The committee only needs per-view predictions
// and the regression branch used to re-calibrate aligned member boxes.
class Detector {
 public:
  virtual ~Detector() = default;
  // Predictions in the coordinate frame of `view`.
  virtual std::vector<LabeledBox> predict(const ImageRecord& image, const AffineView& view,
                                          std::uint64_t seed) const = 0;
  virtual BBox refine(const BBox& box, const ImageRecord& image) const = 0;
};

using Refiner = std::function<BBox(const BBox&)>;

struct CommitteeOutput {
  std::vector<LabeledBox> references;               // chairman, original frame
  std::vector<std::vector<LabeledBox>> member_sets;  // detector, frame of views[m]
  std::vector<AffineView> views;
};

// Member boxes mapped back to the original frame and assigned to references.
struct CommitteeAssignment {
  std::vector<std::vector<BBox>> aligned;                      // [m][j]
  std::vector<std::vector<std::vector<std::size_t>>> matches;  // [m][i] -> j
  std::size_t iou_evaluations = 0;
};

struct BoxScore {
  std::size_t ref_index = 0;
  double d_cls = 0.0;
  double d_loc = 0.0;
  double d_hybrid = 0.0;
  std::size_t matched_members = 0;
  // No member box matched this reference in any view; d_hybrid then holds the
  // ceiling score instead of d_cls * d_loc.
  bool unmatched = false;
};

struct ScoredBox {
  LabeledBox reference;
  BoxScore score;
};

struct ImageScores {
  ImageId image_id = 0;
  std::vector<ScoredBox> boxes;
};

inline constexpr double kProbabilityFloor = 1e-12;

CommitteeAssignment assign_committee(const CommitteeOutput& committee, double tau_assign,
                                     bool class_aware = false);

std::vector<double> classification_disagreement(const CommitteeOutput& committee,
                                                const CommitteeAssignment& assignment);

std::vector<double> localization_disagreement(const CommitteeOutput& committee,
                                              const CommitteeAssignment& assignment,
                                              const Refiner& refiner);

// Normalized coordinate spread of a set of boxes: per-coordinate population
// standard deviation over the normalizer (h + w) / 2 of `reference`, averaged
// over the four coordinates. Fewer than two boxes give 0.
double coordinate_deviation(std::span<const BBox> boxes, const BBox& reference);

inline double hybrid_score(double d_cls, double d_loc) { return d_cls * d_loc; }

// Runs assignment and all disagreement terms. Unmatched references get
// d_hybrid = `ceiling` when given; otherwise they are left for
// apply_ceiling().
std::vector<BoxScore> score_committee(const CommitteeOutput& committee, double tau_assign,
                                      bool class_aware, const Refiner& refiner,
                                      std::optional<double> ceiling = std::nullopt);

struct ViewParams {
  double flip_prob = 0.5;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double max_shift = 0.1;  // fraction of the frame size
};

AffineView sample_view(Rng& rng, double frame_width, double frame_height, const ViewParams& p);

struct CommitteeOptions {
  std::size_t members = 10;
  double tau_assign = 0.5;
  bool class_aware = false;
  ViewParams views;
  std::optional<double> ceiling;
};

CommitteeOutput build_committee(const ImageRecord& image, const Detector& chairman,
                                const Detector& detector, const CommitteeOptions& opts,
                                std::uint64_t seed);

// Full input-end committee pass for one image. Without an explicit ceiling,
// unmatched references are scored with this image's max finite score + 1.
ImageScores score_image(const ImageRecord& image, const Detector& chairman,
                        const Detector& detector, const CommitteeOptions& opts,
                        std::uint64_t seed);

// Re-derives the ceiling for unmatched references across a whole batch:
// `ceiling` if given, else (max finite d_hybrid in the batch) + 1.
void apply_ceiling(std::span<ImageScores> batch, std::optional<double> ceiling = std::nullopt);

// Baselines.
double binary_entropy(double p);
double mean_entropy_score(std::span<const LabeledBox> predictions);
std::size_t box_count_score(std::span<const LabeledBox> predictions, double confidence_floor = 0.3);
double random_score(std::uint64_t seed, ImageId image_id);

struct ImageFeature {
  std::vector<double> vector;
};

// Confidence-weighted, normalized class histogram followed by mean relative
// centre x/y, mean relative width/height and log(1 + box count).
ImageFeature image_feature(std::span<const LabeledBox> predictions, int num_classes,
                           double image_width, double image_height);

// Greedy k-center selection. Returns k indices not in `selected`, in pick
// order. Throws ConfigError when `selected` is empty or k exceeds the
// remaining pool.
std::vector<std::size_t> k_center_greedy(std::span<const ImageFeature> features,
                                         std::span<const std::size_t> selected, std::size_t k);

// Tab-separated per-box score table: image_id x1 y1 x2 y2 class d_cls d_loc d_hybrid.
void write_box_scores(std::ostream& out, std::span<const ImageScores> scores);

}  // namespace boxald
