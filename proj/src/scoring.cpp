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
#include "boxald/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "boxald/errors.hpp"

namespace boxald {

namespace {

// Sum in sorted order so the result does not depend on input order.
double order_free_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double population_std(std::vector<double> values) {
  if (values.size() < 2) return 0.0;
  std::sort(values.begin(), values.end());
  // Shifted by the smallest value so identical inputs give exactly 0.
  const double n = static_cast<double>(values.size());
  const double origin = values.front();
  double mean = 0.0;
  for (double v : values) mean += v - origin;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - origin - mean) * (v - origin - mean);
  return std::sqrt(var / n);
}

int argmax_class(const LabeledBox& b) {
  if (b.score_dist.empty()) return b.class_id;
  return static_cast<int>(std::max_element(b.score_dist.begin(), b.score_dist.end()) -
                          b.score_dist.begin());
}

}  // namespace

CommitteeAssignment assign_committee(const CommitteeOutput& committee, double tau_assign,
                                     bool class_aware) {
  if (committee.member_sets.size() != committee.views.size()) {
    throw DimensionError("committee: member_sets and views differ in length");
  }
  CommitteeAssignment out;
  const std::size_t m_count = committee.member_sets.size();
  out.aligned.resize(m_count);
  out.matches.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    std::vector<LabeledBox> aligned = committee.member_sets[m];
    for (auto& b : aligned) b.box = invert_view(committee.views[m], b.box);
    const Assignment a = max_iou_assign(committee.references, aligned, tau_assign, class_aware);
    out.iou_evaluations += a.iou_evaluations;
    out.matches[m] = a.per_reference;
    out.aligned[m].reserve(aligned.size());
    for (const auto& b : aligned) out.aligned[m].push_back(b.box);
  }
  return out;
}

std::vector<double> classification_disagreement(const CommitteeOutput& committee,
                                                const CommitteeAssignment& assignment) {
  const std::size_t r_count = committee.references.size();
  std::vector<double> out(r_count, 0.0);
  for (std::size_t i = 0; i < r_count; ++i) {
    const int c_star = argmax_class(committee.references[i]);
    std::vector<double> per_member;
    for (std::size_t m = 0; m < assignment.matches.size(); ++m) {
      const auto& js = assignment.matches[m][i];
      if (js.empty()) continue;
      double inner = 0.0;
      for (std::size_t j : js) {
        const auto& dist = committee.member_sets[m][j].score_dist;
        const double q = c_star < static_cast<int>(dist.size()) ? dist[c_star] : 0.0;
        inner += -std::log(std::max(q, kProbabilityFloor));
      }
      per_member.push_back(inner / static_cast<double>(js.size()));
    }
    if (!per_member.empty()) {
      const double n = static_cast<double>(per_member.size());
      out[i] = order_free_sum(std::move(per_member)) / n;
    }
  }
  return out;
}

double coordinate_deviation(std::span<const BBox> boxes, const BBox& reference) {
  if (boxes.size() < 2) return 0.0;
  const double normalizer = (reference.width() + reference.height()) / 2.0;
  std::vector<double> coord(boxes.size());
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    for (std::size_t n = 0; n < boxes.size(); ++n) {
      const BBox& b = boxes[n];
      coord[n] = k == 0 ? b.x1 : k == 1 ? b.y1 : k == 2 ? b.x2 : b.y2;
    }
    total += population_std(coord) / normalizer;
  }
  return total / 4.0;
}

std::vector<double> localization_disagreement(const CommitteeOutput& committee,
                                              const CommitteeAssignment& assignment,
                                              const Refiner& refiner) {
  const std::size_t r_count = committee.references.size();
  std::vector<double> out(r_count, 0.0);
  for (std::size_t i = 0; i < r_count; ++i) {
    std::vector<BBox> refined;
    for (std::size_t m = 0; m < assignment.matches.size(); ++m) {
      for (std::size_t j : assignment.matches[m][i]) refined.push_back(refiner(assignment.aligned[m][j]));
    }
    out[i] = coordinate_deviation(refined, committee.references[i].box);
  }
  return out;
}

std::vector<BoxScore> score_committee(const CommitteeOutput& committee, double tau_assign,
                                      bool class_aware, const Refiner& refiner,
                                      std::optional<double> ceiling) {
  const CommitteeAssignment assignment = assign_committee(committee, tau_assign, class_aware);
  const auto d_cls = classification_disagreement(committee, assignment);
  const auto d_loc = localization_disagreement(committee, assignment, refiner);
  std::vector<BoxScore> out(committee.references.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    BoxScore& s = out[i];
    s.ref_index = i;
    s.d_cls = d_cls[i];
    s.d_loc = d_loc[i];
    for (const auto& per_ref : assignment.matches) s.matched_members += per_ref[i].size();
    s.unmatched = s.matched_members == 0;
    s.d_hybrid = s.unmatched ? ceiling.value_or(std::numeric_limits<double>::quiet_NaN())
                             : hybrid_score(s.d_cls, s.d_loc);
  }
  return out;
}

AffineView sample_view(Rng& rng, double frame_width, double frame_height, const ViewParams& p) {
  AffineView v;
  v.frame_width = frame_width;
  v.hflip = rng.bernoulli(p.flip_prob);
  v.scale = rng.uniform(p.scale_min, p.scale_max);
  v.dx = rng.uniform(-p.max_shift, p.max_shift) * frame_width;
  v.dy = rng.uniform(-p.max_shift, p.max_shift) * frame_height;
  return v;
}

CommitteeOutput build_committee(const ImageRecord& image, const Detector& chairman,
                                const Detector& detector, const CommitteeOptions& opts,
                                std::uint64_t seed) {
  const auto img = static_cast<std::uint64_t>(image.id);
  CommitteeOutput c;
  c.references = chairman.predict(image, AffineView::identity(image.width),
                                  derive_seed(seed, {img, 0}));
  if (c.references.empty()) return c;
  Rng view_rng(derive_seed(seed, {img, 0x7669657773ULL}));
  c.views.reserve(opts.members);
  c.member_sets.reserve(opts.members);
  for (std::size_t m = 0; m < opts.members; ++m) {
    c.views.push_back(sample_view(view_rng, image.width, image.height, opts.views));
    c.member_sets.push_back(detector.predict(image, c.views.back(), derive_seed(seed, {img, m + 1})));
  }
  return c;
}

ImageScores score_image(const ImageRecord& image, const Detector& chairman,
                        const Detector& detector, const CommitteeOptions& opts,
                        std::uint64_t seed) {
  ImageScores out;
  out.image_id = image.id;
  const CommitteeOutput committee = build_committee(image, chairman, detector, opts, seed);
  if (committee.references.empty()) return out;
  const Refiner refiner = [&](const BBox& b) { return chairman.refine(b, image); };
  const auto scores = score_committee(committee, opts.tau_assign, opts.class_aware, refiner, opts.ceiling);
  out.boxes.reserve(scores.size());
  for (const auto& s : scores) out.boxes.push_back({committee.references[s.ref_index], s});
  if (!opts.ceiling) apply_ceiling(std::span<ImageScores>(&out, 1));
  return out;
}

void apply_ceiling(std::span<ImageScores> batch, std::optional<double> ceiling) {
  double value = 0.0;
  if (ceiling) {
    value = *ceiling;
  } else {
    double max_finite = 0.0;
    for (const auto& img : batch) {
      for (const auto& b : img.boxes) {
        if (!b.score.unmatched && std::isfinite(b.score.d_hybrid)) max_finite = std::max(max_finite, b.score.d_hybrid);
      }
    }
    value = max_finite + 1.0;
  }
  for (auto& img : batch) {
    for (auto& b : img.boxes) {
      if (b.score.unmatched) b.score.d_hybrid = value;
    }
  }
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

double mean_entropy_score(std::span<const LabeledBox> predictions) {
  if (predictions.empty()) return 0.0;
  double s = 0.0;
  for (const auto& b : predictions) {
    const double p = b.score_dist.empty()
                         ? b.confidence
                         : *std::max_element(b.score_dist.begin(), b.score_dist.end());
    s += binary_entropy(p);
  }
  return s / static_cast<double>(predictions.size());
}

std::size_t box_count_score(std::span<const LabeledBox> predictions, double confidence_floor) {
  return static_cast<std::size_t>(std::count_if(predictions.begin(), predictions.end(), [&](const LabeledBox& b) {
    return b.confidence >= confidence_floor;
  }));
}

double random_score(std::uint64_t seed, ImageId image_id) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(image_id), 0x72616E64ULL}));
  return rng.uniform();
}

ImageFeature image_feature(std::span<const LabeledBox> predictions, int num_classes,
                           double image_width, double image_height) {
  ImageFeature f;
  f.vector.assign(static_cast<std::size_t>(num_classes) + 5, 0.0);
  double weight = 0.0;
  for (const auto& b : predictions) {
    if (b.class_id >= 0 && b.class_id < num_classes) {
      f.vector[b.class_id] += b.confidence;
      weight += b.confidence;
    }
  }
  if (weight > 0.0) {
    for (int c = 0; c < num_classes; ++c) f.vector[c] /= weight;
  }
  if (!predictions.empty()) {
    const double n = static_cast<double>(predictions.size());
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    for (const auto& b : predictions) {
      cx += (b.box.x1 + b.box.x2) / (2.0 * image_width);
      cy += (b.box.y1 + b.box.y2) / (2.0 * image_height);
      w += b.box.width() / image_width;
      h += b.box.height() / image_height;
    }
    const std::size_t base = static_cast<std::size_t>(num_classes);
    f.vector[base] = cx / n;
    f.vector[base + 1] = cy / n;
    f.vector[base + 2] = w / n;
    f.vector[base + 3] = h / n;
  }
  f.vector.back() = std::log1p(static_cast<double>(predictions.size()));
  return f;
}

std::vector<std::size_t> k_center_greedy(std::span<const ImageFeature> features,
                                         std::span<const std::size_t> selected, std::size_t k) {
  if (selected.empty()) throw ConfigError("k_center_greedy: selected set must be non-empty");
  std::vector<bool> taken(features.size(), false);
  for (std::size_t s : selected) {
    if (s >= features.size()) throw ConfigError("k_center_greedy: selected index out of range");
    taken[s] = true;
  }
  const auto remaining = static_cast<std::size_t>(std::count(taken.begin(), taken.end(), false));
  if (k > remaining) throw ConfigError("k_center_greedy: k exceeds the remaining pool");

  auto distance = [&](std::size_t a, std::size_t b) {
    const auto& va = features[a].vector;
    const auto& vb = features[b].vector;
    if (va.size() != vb.size()) throw DimensionError("k_center_greedy: feature dimensions differ");
    double s = 0.0;
    for (std::size_t d = 0; d < va.size(); ++d) s += (va[d] - vb[d]) * (va[d] - vb[d]);
    return std::sqrt(s);
  };

  std::vector<double> min_dist(features.size(), std::numeric_limits<double>::infinity());
  for (std::size_t p = 0; p < features.size(); ++p) {
    if (taken[p]) continue;
    for (std::size_t s : selected) min_dist[p] = std::min(min_dist[p], distance(p, s));
  }
  std::vector<std::size_t> picks;
  picks.reserve(k);
  while (picks.size() < k) {
    std::size_t best = features.size();
    for (std::size_t p = 0; p < features.size(); ++p) {
      if (taken[p]) continue;
      if (best == features.size() || min_dist[p] > min_dist[best]) best = p;
    }
    taken[best] = true;
    picks.push_back(best);
    for (std::size_t p = 0; p < features.size(); ++p) {
      if (!taken[p]) min_dist[p] = std::min(min_dist[p], distance(p, best));
    }
  }
  return picks;
}

void write_box_scores(std::ostream& out, std::span<const ImageScores> scores) {
  out << "image_id\tx1\ty1\tx2\ty2\tclass_id\td_cls\td_loc\td_hybrid\n";
  const auto old = out.precision(10);
  for (const auto& img : scores) {
    for (const auto& b : img.boxes) {
      const auto& r = b.reference;
      out << img.image_id << '\t' << r.box.x1 << '\t' << r.box.y1 << '\t' << r.box.x2 << '\t'
          << r.box.y2 << '\t' << r.class_id << '\t' << b.score.d_cls << '\t' << b.score.d_loc
          << '\t' << b.score.d_hybrid << '\n';
    }
  }
  out.precision(old);
}

}  // namespace boxald
