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
#include "boxald/simdet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "boxald/errors.hpp"
#include "boxald/rng.hpp"

namespace boxald {

namespace {

constexpr std::uint64_t kClutterTag = 0xC1077E5ULL;

// softmax(one_hot(true_class) / tau), evaluated without overflow.
std::vector<double> tempered_one_hot(int num_classes, int true_class, double tau) {
  std::vector<double> dist(static_cast<std::size_t>(num_classes), 0.0);
  if (tau < 1e-3 || num_classes == 1) {
    dist[true_class] = 1.0;
    return dist;
  }
  const double e = std::exp(-1.0 / tau);
  const double denom = 1.0 + static_cast<double>(num_classes - 1) * e;
  for (auto& p : dist) p = e / denom;
  dist[true_class] = 1.0 / denom;
  return dist;
}

BBox ensure_valid(BBox b, double min_w, double min_h) {
  if (b.x2 - b.x1 < min_w) {
    const double cx = (b.x1 + b.x2) / 2.0;
    b.x1 = cx - min_w / 2.0;
    b.x2 = cx + min_w / 2.0;
  }
  if (b.y2 - b.y1 < min_h) {
    const double cy = (b.y1 + b.y2) / 2.0;
    b.y1 = cy - min_h / 2.0;
    b.y2 = cy + min_h / 2.0;
  }
  return b;
}

double saturation(double x) { return x / (1.0 + x); }

}  // namespace

SimDetectorState SimDetectorState::fresh(int num_classes, const SimParams& params, std::uint64_t seed) {
  SimDetectorState s;
  s.params = params;
  s.class_counts.assign(static_cast<std::size_t>(num_classes), 0.0);
  s.hard_counts.assign(static_cast<std::size_t>(num_classes), 0.0);
  s.seed = seed;
  return s;
}

double SimDetectorState::knowledge(int class_id, double difficulty) const {
  if (class_id < 0 || class_id >= static_cast<int>(class_counts.size())) return 0.0;
  return (1.0 - difficulty) * class_counts[class_id] + difficulty * params.hard_gain * hard_counts[class_id];
}

double SimDetectorState::recall(double difficulty, double knowledge) const {
  const double r = params.recall_floor + (1.0 - params.recall_floor) *
                                             saturation(params.knowledge_scale * knowledge) *
                                             (1.0 - 0.5 * difficulty);
  return std::clamp(r, 0.0, 1.0);
}

ParamVector SimDetectorState::to_param_vector() const {
  ParamVector p;
  p.values = class_counts;
  p.values.insert(p.values.end(), hard_counts.begin(), hard_counts.end());
  return p;
}

SimDetectorState SimDetectorState::with_param_vector(const ParamVector& p) const {
  if (p.values.size() != class_counts.size() + hard_counts.size()) {
    throw DimensionError("sim detector: parameter vector has " + std::to_string(p.values.size()) +
                         " values, expected " + std::to_string(class_counts.size() + hard_counts.size()));
  }
  SimDetectorState s = *this;
  const auto split = p.values.begin() + static_cast<std::ptrdiff_t>(class_counts.size());
  s.class_counts.assign(p.values.begin(), split);
  s.hard_counts.assign(split, p.values.end());
  return s;
}

std::vector<LabeledBox> SimDetector::predict(const ImageRecord& image, const AffineView& view,
                                             std::uint64_t seed) const {
  const SimParams& prm = state_.params;
  const int num_classes = static_cast<int>(state_.class_counts.size());
  std::vector<LabeledBox> out;
  for (std::size_t g = 0; g < image.boxes.size(); ++g) {
    const GroundTruthBox& gt = image.boxes[g];
    // Fixed draw count per target keeps streams aligned across detector states.
    Rng rng(derive_seed(seed, {g}));
    const double u = rng.uniform();
    const double noise[4] = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};

    const double d = gt.difficulty;
    const double k = state_.knowledge(gt.label.class_id, d);
    if (u >= state_.recall(d, k)) continue;
    const double shrink = 1.0 + prm.knowledge_scale * k;
    const BBox vb = apply_view(view, gt.label.box);
    const double sigma = (prm.sigma0 + extra_noise_) * d / shrink;
    const double w = vb.width();
    const double h = vb.height();
    BBox b{vb.x1 + noise[0] * sigma * w, vb.y1 + noise[1] * sigma * h, vb.x2 + noise[2] * sigma * w,
           vb.y2 + noise[3] * sigma * h};
    b = ensure_valid(b, 0.05 * w, 0.05 * h);
    out.push_back(LabeledBox::from_distribution(
        b, tempered_one_hot(num_classes, gt.label.class_id, prm.tau0 * d / shrink)));
  }

  double mean_count = 0.0;
  for (double c : state_.class_counts) mean_count += c;
  if (num_classes > 0) mean_count /= num_classes;
  const double rate = prm.clutter_rate / (1.0 + prm.knowledge_scale * mean_count);
  Rng rng(derive_seed(seed, {kClutterTag}));
  const double whole = std::floor(rate);
  const std::size_t n_clutter = static_cast<std::size_t>(whole) + (rng.bernoulli(rate - whole) ? 1 : 0);
  for (std::size_t n = 0; n < n_clutter && num_classes > 0; ++n) {
    const double w = rng.uniform(0.05, 0.3) * image.width;
    const double h = rng.uniform(0.05, 0.3) * image.height;
    const double x = rng.uniform(0.0, image.width - w);
    const double y = rng.uniform(0.0, image.height - h);
    const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
    out.push_back(LabeledBox::from_distribution(apply_view(view, {x, y, x + w, y + h}),
                                                tempered_one_hot(num_classes, cls, prm.tau0)));
  }
  return out;
}

BBox pull_toward(const BBox& box, const BBox& target, double strength) {
  return {box.x1 + strength * (target.x1 - box.x1), box.y1 + strength * (target.y1 - box.y1),
          box.x2 + strength * (target.x2 - box.x2), box.y2 + strength * (target.y2 - box.y2)};
}

BBox SimDetector::refine(const BBox& box, const ImageRecord& image) const {
  double best = 0.0;
  const GroundTruthBox* match = nullptr;
  for (const auto& gt : image.boxes) {
    const double v = iou(box, gt.label.box);
    if (v > best) {
      best = v;
      match = &gt;
    }
  }
  if (match == nullptr) return box;
  const SimParams& prm = state_.params;
  const double d = match->difficulty;
  const double k = state_.knowledge(match->label.class_id, d);
  const double strength =
      std::clamp(prm.refine_base + (1.0 - prm.refine_base) * saturation(prm.knowledge_scale * k), 0.0, 1.0) *
      (1.0 - d);
  return pull_toward(box, match->label.box, strength);
}

SimDetectorState learn(const SimDetectorState& state, const PoolState& pool,
                       const DatasetIndex& dataset, const PseudoLabels& pseudo) {
  const std::size_t num_classes = state.class_counts.size();
  std::vector<double> counts(num_classes, 0.0);
  std::vector<double> hard(num_classes, 0.0);
  auto add = [&](const GroundTruthBox& b) {
    const auto c = static_cast<std::size_t>(b.label.class_id);
    if (c >= num_classes) return;
    counts[c] += 1.0;
    hard[c] += b.difficulty;
  };
  for (ImageId id : pool.fully_labeled) {
    for (const auto& b : dataset.at(id).boxes) add(b);
  }
  for (const auto& [id, revealed] : pool.sparse) {
    const auto& img = dataset.at(id);
    for (std::size_t b : revealed) add(img.boxes[b]);
  }
  for (const auto& [id, boxes] : pseudo) {
    for (const auto& b : boxes) {
      const auto c = static_cast<std::size_t>(b.class_id);
      if (c < num_classes) counts[c] += state.params.pseudo_weight;
    }
  }
  SimDetectorState out = state;
  for (std::size_t c = 0; c < num_classes; ++c) {
    out.class_counts[c] = std::max(state.class_counts[c], counts[c]);
    out.hard_counts[c] = std::max(state.hard_counts[c], hard[c]);
  }
  return out;
}

std::size_t SyntheticDataset::hard_boxes() const {
  std::size_t n = 0;
  for (const auto& img : index.images()) {
    for (const auto& b : img.boxes) n += b.difficulty >= kHardDifficulty ? 1 : 0;
  }
  return n;
}

namespace {

constexpr double kOcclusionMaxIou = 0.35;

// Coordinates on a 1/16 px grid keep corner <-> (x, y, w, h) conversion exact.
BBox snap(const BBox& b) {
  auto q = [](double v) { return std::round(v * 16.0) / 16.0; };
  return {q(b.x1), q(b.y1), q(b.x2), q(b.y2)};
}

}  // namespace

SyntheticDataset synthesize(const SynthOptions& opts, std::uint64_t seed) {
  if (opts.num_classes < 1) throw ConfigError("synthesize: need at least one class");
  if (opts.hard_fraction < 0.0 || opts.hard_fraction > 1.0) {
    throw ConfigError("synthesize: hard_fraction must lie in [0, 1]");
  }
  if (opts.mean_boxes < 1.0) throw ConfigError("synthesize: mean_boxes must be >= 1");
  Rng rng(derive_seed(seed, {0x73796E7468ULL}));

  const auto max_boxes = static_cast<std::uint64_t>(std::llround(2.0 * opts.mean_boxes - 1.0));
  std::vector<std::size_t> per_image(opts.n_images);
  std::size_t total = 0;
  for (auto& n : per_image) {
    n = 1 + static_cast<std::size_t>(rng.below(max_boxes));
    total += n;
  }
  std::vector<bool> hard(total, false);
  const auto n_hard = static_cast<std::size_t>(std::llround(opts.hard_fraction * static_cast<double>(total)));
  std::fill(hard.begin(), hard.begin() + static_cast<std::ptrdiff_t>(n_hard), true);
  for (std::size_t i = total; i > 1; --i) {
    const std::size_t j = rng.below(i);
    const bool tmp = hard[i - 1];
    hard[i - 1] = hard[j];
    hard[j] = tmp;
  }

  const double W = opts.width;
  const double H = opts.height;
  constexpr int kMaxTries = 200;
  std::vector<ImageRecord> images;
  images.reserve(opts.n_images);
  std::size_t slot = 0;
  for (std::size_t i = 0; i < opts.n_images; ++i) {
    ImageRecord img;
    img.id = opts.first_id + static_cast<ImageId>(i);
    img.width = W;
    img.height = H;
    img.file_name = "synthetic/" + std::to_string(img.id) + ".png";
    for (std::size_t k = 0; k < per_image[i]; ++k, ++slot) {
      GroundTruthBox gt;
      gt.label.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.num_classes)));
      gt.source_id = static_cast<std::int64_t>(slot + 1);
      const bool is_hard = hard[slot];
      // Hard targets are either small or heavily overlapped by an earlier box.
      const bool occluded = is_hard && !img.boxes.empty() && rng.bernoulli(0.5);
      gt.difficulty = is_hard ? rng.uniform(kHardDifficulty, 1.0) : rng.uniform(0.05, 0.5);
      bool placed = false;
      for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
        BBox b;
        if (occluded) {
          // Mostly covered by the host, yet distinct from every box at IoU level.
          const BBox& host = img.boxes[rng.below(img.boxes.size())].label.box;
          const double w = host.width() * rng.uniform(0.35, 0.7);
          const double h = host.height() * rng.uniform(0.35, 0.7);
          const double x = host.x1 + rng.uniform(-0.25, 1.0) * host.width() - 0.5 * w;
          const double y = host.y1 + rng.uniform(-0.25, 1.0) * host.height() - 0.5 * h;
          b = snap({x, y, x + w, y + h});
          if (b.x1 < 0 || b.y1 < 0 || b.x2 > W || b.y2 > H) continue;
          const double ix = std::max(0.0, std::min(b.x2, host.x2) - std::max(b.x1, host.x1));
          const double iy = std::max(0.0, std::min(b.y2, host.y2) - std::max(b.y1, host.y1));
          if (ix * iy < 0.5 * b.area()) continue;
          bool distinct = true;
          for (const auto& other : img.boxes) distinct = distinct && iou(b, other.label.box) < kOcclusionMaxIou;
          if (!distinct) continue;
        } else if (is_hard) {
          const double w = rng.uniform(0.04, 0.15) * W;
          const double h = rng.uniform(0.04, 0.15) * H;
          const double x = rng.uniform(0.0, W - w);
          const double y = rng.uniform(0.0, H - h);
          b = snap({x, y, x + w, y + h});
        } else {
          const double w = rng.uniform(0.12, 0.4) * W;
          const double h = rng.uniform(0.12, 0.4) * H;
          const double x = rng.uniform(0.0, W - w);
          const double y = rng.uniform(0.0, H - h);
          b = snap({x, y, x + w, y + h});
          bool clear = true;
          for (const auto& other : img.boxes) clear = clear && iou(b, other.label.box) <= 0.3;
          if (!clear) continue;
        }
        gt.label.box = b;
        placed = true;
      }
      if (!placed) {
        throw ConfigError("synthesize: could not place box " + std::to_string(k) + " of image " +
                          std::to_string(img.id) + " after " + std::to_string(kMaxTries) + " tries");
      }
      img.boxes.push_back(gt);
    }
    images.push_back(std::move(img));
  }
  std::vector<Category> categories;
  for (int c = 0; c < opts.num_classes; ++c) categories.push_back({c, "class_" + std::to_string(c), c + 1});
  return {DatasetIndex(std::move(images), std::move(categories))};
}

double proxy_loss(const Detector& detector, const ImageRecord& image,
                  std::span<const LabeledBox> targets, std::uint64_t seed) {
  if (targets.empty()) return 0.0;
  const auto preds = detector.predict(image, AffineView::identity(image.width), seed);
  double total = 0.0;
  for (const auto& t : targets) {
    double best = 0.0;
    for (const auto& p : preds) {
      if (p.class_id == t.class_id) best = std::max(best, iou(p.box, t.box));
    }
    total += 1.0 - best;
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace boxald
