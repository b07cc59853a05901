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
#include "boxald/pseudo.hpp"

#include <algorithm>

#include "boxald/errors.hpp"
#include "boxald/rng.hpp"

namespace boxald {

namespace {

double max_probability(const LabeledBox& b) {
  if (b.score_dist.empty()) return b.confidence;
  return *std::max_element(b.score_dist.begin(), b.score_dist.end());
}

}  // namespace

std::vector<LabeledBox> filter_cls_pseudo(std::span<const LabeledBox> predictions, double lambda_c) {
  std::vector<LabeledBox> out;
  for (const auto& p : predictions) {
    if (max_probability(p) >= lambda_c) out.push_back(p);
  }
  return out;
}

double jitter_deviation(const LabeledBox& candidate, const Refiner& refiner,
                        const JitterOptions& jitter, std::uint64_t seed) {
  if (jitter.n_jitter < 2) throw ConfigError("filter_loc_pseudo: n_jitter must be >= 2");
  Rng rng(seed);
  const BBox& b = candidate.box;
  const double w = b.width();
  const double h = b.height();
  std::vector<BBox> refined;
  refined.reserve(jitter.n_jitter);
  for (std::size_t n = 0; n < jitter.n_jitter; ++n) {
    BBox j{b.x1 + rng.uniform(-1.0, 1.0) * jitter.jitter_frac * w,
           b.y1 + rng.uniform(-1.0, 1.0) * jitter.jitter_frac * h,
           b.x2 + rng.uniform(-1.0, 1.0) * jitter.jitter_frac * w,
           b.y2 + rng.uniform(-1.0, 1.0) * jitter.jitter_frac * h};
    refined.push_back(refiner(j));
  }
  return coordinate_deviation(refined, b);
}

std::vector<LabeledBox> filter_loc_pseudo(std::span<const LabeledBox> predictions,
                                          const Refiner& refiner, double lambda_r,
                                          const JitterOptions& jitter, std::uint64_t seed) {
  if (jitter.n_jitter < 2) throw ConfigError("filter_loc_pseudo: n_jitter must be >= 2");
  std::vector<LabeledBox> out;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (jitter_deviation(predictions[i], refiner, jitter, derive_seed(seed, {i})) < lambda_r) {
      out.push_back(predictions[i]);
    }
  }
  return out;
}

SupervisionStream merge_stream(std::span<const LabeledBox> human, std::span<const LabeledBox> pseudo,
                               double lambda_g) {
  SupervisionStream out;
  out.reserve(human.size() + pseudo.size());
  for (const auto& g : human) out.push_back({g, Provenance::kHuman});
  for (const auto& p : pseudo) {
    const bool clear = std::all_of(human.begin(), human.end(),
                                   [&](const LabeledBox& g) { return iou(p.box, g.box) <= lambda_g; });
    if (clear) out.push_back({p, Provenance::kPseudo});
  }
  return out;
}

MergedSupervision merge_supervision(std::span<const LabeledBox> human, const PseudoSet& pseudo,
                                    double lambda_g) {
  return {merge_stream(human, pseudo.cls_pseudo, lambda_g), merge_stream(human, pseudo.loc_pseudo, lambda_g)};
}

ObjectiveBreakdown compose_objective(double labeled_loss, double sparse_loss, double unlabeled_loss,
                                     std::size_t n_labeled, std::size_t n_sparse,
                                     std::size_t n_unlabeled, bool mixed) {
  if (n_labeled == 0) throw ConfigError("compose_objective: N_l must be >= 1");
  if (labeled_loss < 0.0 || sparse_loss < 0.0 || unlabeled_loss < 0.0) {
    throw ConfigError("compose_objective: loss components must be non-negative");
  }
  ObjectiveBreakdown o{labeled_loss, sparse_loss, unlabeled_loss, n_labeled, n_sparse, n_unlabeled, 0.0};
  const double nl = static_cast<double>(n_labeled);
  o.total = labeled_loss + (static_cast<double>(n_sparse) / nl) * sparse_loss;
  if (mixed) o.total += (static_cast<double>(n_unlabeled) / nl) * unlabeled_loss;
  return o;
}

}  // namespace boxald
