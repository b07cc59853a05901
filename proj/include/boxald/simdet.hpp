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
#include <map>
#include <span>
#include <vector>

#include "boxald/dataset.hpp"
#include "boxald/ema.hpp"
#include "boxald/pools.hpp"
#include "boxald/scoring.hpp"

namespace boxald {

// Noise model of the simulated detector. All geometric noise is expressed as
// a fraction of the box size.
struct SimParams {
  double tau0 = 1.0;             // class temperature at difficulty 1, zero knowledge
  double sigma0 = 0.1;           // box jitter at difficulty 1, zero knowledge
  double recall_floor = 0.4;
  double knowledge_scale = 0.05;
  // Weight of difficulty-weighted examples in the knowledge of hard targets.
  double hard_gain = 1.5;
  double clutter_rate = 0.05;    // false positives per image at zero knowledge
  double refine_base = 0.3;      // regression pull at zero knowledge, difficulty 0
  double pseudo_weight = 0.5;

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

struct SimDetectorState {
  SimParams params;
  std::vector<double> class_counts;  // revealed boxes per class, pseudo-labels weighted
  std::vector<double> hard_counts;   // revealed boxes per class weighted by difficulty
  std::uint64_t seed = 0;

  static SimDetectorState fresh(int num_classes, const SimParams& params, std::uint64_t seed);

  // Effective knowledge of a target of class `class_id` and difficulty `d`.
  double knowledge(int class_id, double difficulty) const;
  double recall(double difficulty, double knowledge) const;

  ParamVector to_param_vector() const;
  SimDetectorState with_param_vector(const ParamVector& p) const;

  friend bool operator==(const SimDetectorState&, const SimDetectorState&) = default;
};

class SimDetector : public Detector {
 public:
  SimDetector(SimDetectorState state, double extra_noise) : state_(std::move(state)), extra_noise_(extra_noise) {}

  std::vector<LabeledBox> predict(const ImageRecord& image, const AffineView& view,
                                  std::uint64_t seed) const override;
  BBox refine(const BBox& box, const ImageRecord& image) const override;

  const SimDetectorState& state() const { return state_; }
  double extra_noise() const { return extra_noise_; }

 private:
  SimDetectorState state_;
  double extra_noise_;
};

// Per-coordinate linear interpolation from `box` toward `target`.
BBox pull_toward(const BBox& box, const BBox& target, double strength);

// Pseudo-labels accepted for training, keyed by image.
using PseudoLabels = std::map<ImageId, std::vector<LabeledBox>>;

// Recomputes knowledge from revealed boxes plus weighted pseudo-labels.
// Counts never decrease relative to `state`.
SimDetectorState learn(const SimDetectorState& state, const PoolState& pool,
                       const DatasetIndex& dataset, const PseudoLabels& pseudo = {});

struct SynthOptions {
  std::size_t n_images = 200;
  int num_classes = 6;
  double mean_boxes = 6.0;  // boxes per image uniform on [1, 2 * mean - 1]
  double hard_fraction = 0.35;
  double width = 640.0;
  double height = 480.0;
  ImageId first_id = 1;

  friend bool operator==(const SynthOptions&, const SynthOptions&) = default;
};

inline constexpr double kHardDifficulty = 0.7;
inline constexpr double kEasyDifficulty = 0.3;

struct SyntheticDataset {
  DatasetIndex index;  // GroundTruthBox::difficulty carries the hidden hardness

  std::size_t hard_boxes() const;
};

// Throws ConfigError when boxes cannot be placed after bounded retries.
SyntheticDataset synthesize(const SynthOptions& opts, std::uint64_t seed);

// Mean over targets of (1 - IoU with the best same-class prediction); 0 for
// an empty target list.
double proxy_loss(const Detector& detector, const ImageRecord& image,
                  std::span<const LabeledBox> targets, std::uint64_t seed);

}  // namespace boxald
