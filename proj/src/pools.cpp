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
#include "boxald/pools.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "boxald/errors.hpp"
#include "boxald/rng.hpp"

namespace boxald {

std::set<std::size_t> revealed_boxes(const PoolState& pool, const ImageRecord& image) {
  if (pool.is_labeled(image.id)) {
    std::set<std::size_t> all;
    for (std::size_t b = 0; b < image.boxes.size(); ++b) all.insert(b);
    return all;
  }
  const auto it = pool.sparse.find(image.id);
  return it == pool.sparse.end() ? std::set<std::size_t>{} : it->second;
}

std::size_t count_revealed(const PoolState& pool, const DatasetIndex& dataset) {
  std::size_t n = 0;
  for (ImageId id : pool.fully_labeled) n += dataset.at(id).boxes.size();
  for (const auto& [id, boxes] : pool.sparse) n += boxes.size();
  return n;
}

void check_partition(const PoolState& pool, const DatasetIndex& dataset) {
  std::size_t seen = 0;
  for (const auto& img : dataset.images()) {
    const int memberships = static_cast<int>(pool.is_labeled(img.id)) +
                            static_cast<int>(pool.is_sparse(img.id)) +
                            static_cast<int>(pool.is_unlabeled(img.id));
    if (memberships != 1) {
      throw IntegrityError("pool: image " + std::to_string(img.id) + " is in " +
                           std::to_string(memberships) + " pools");
    }
    ++seen;
  }
  if (pool.fully_labeled.size() + pool.sparse.size() + pool.unlabeled.size() != seen) {
    throw IntegrityError("pool: partition contains ids outside the dataset");
  }
  for (const auto& [id, boxes] : pool.sparse) {
    const auto& img = dataset.at(id);
    if (boxes.empty()) throw IntegrityError("pool: sparse image " + std::to_string(id) + " has no labels");
    if (boxes.size() >= img.boxes.size() && !img.boxes.empty()) {
      throw IntegrityError("pool: sparse image " + std::to_string(id) + " is fully revealed");
    }
    for (std::size_t b : boxes) {
      if (b >= img.boxes.size()) throw IntegrityError("pool: revealed box id out of range");
    }
  }
}

LedgerEntry& BudgetLedger::open(int cycle) {
  if (!entries.empty() && entries.back().cycle >= cycle) {
    throw IntegrityError("ledger: cycle " + std::to_string(cycle) + " opened out of order");
  }
  entries.push_back({});
  entries.back().cycle = cycle;
  return entries.back();
}

const LedgerEntry* BudgetLedger::find(int cycle) const {
  for (const auto& e : entries) {
    if (e.cycle == cycle) return &e;
  }
  return nullptr;
}

std::pair<PoolState, BudgetLedger> init_pool(const DatasetIndex& dataset, std::size_t init_budget,
                                             std::uint64_t seed) {
  if (init_budget < 1) throw ConfigError("init_pool: init_budget must be >= 1");
  if (dataset.total_boxes() < init_budget) {
    throw ConfigError("init_pool: dataset has " + std::to_string(dataset.total_boxes()) +
                      " boxes, fewer than the initial budget " + std::to_string(init_budget));
  }
  std::vector<ImageId> order;
  order.reserve(dataset.size());
  for (const auto& img : dataset.images()) order.push_back(img.id);
  Rng rng(derive_seed(seed, {0x696E6974ULL}));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  PoolState pool;
  BudgetLedger ledger;
  LedgerEntry& entry = ledger.open(0);
  for (ImageId id : order) {
    if (ledger.cumulative_boxes >= init_budget) {
      pool.unlabeled.insert(id);
      continue;
    }
    const std::size_t n = dataset.at(id).boxes.size();
    pool.fully_labeled.insert(id);
    entry.boxes_charged += n;
    entry.touched.insert(id);
    ledger.cumulative_boxes += n;
  }
  ledger.init_overshoot = ledger.cumulative_boxes - init_budget;
  return {std::move(pool), std::move(ledger)};
}

std::size_t proposal_limit(const ProposalOptions& opts) {
  return static_cast<std::size_t>(
      std::ceil(opts.over_provision * static_cast<double>(opts.per_cycle_budget) - 1e-9));
}

QueryBatch propose_queries(std::span<const ImageScores> scores, const PoolState& pool,
                           const DatasetIndex& dataset, const ProposalOptions& opts) {
  struct Candidate {
    std::size_t image;
    std::size_t box;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (pool.is_labeled(scores[i].image_id) || !dataset.contains(scores[i].image_id)) continue;
    for (std::size_t b = 0; b < scores[i].boxes.size(); ++b) candidates.push_back({i, b});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    return scores[a.image].boxes[a.box].score.d_hybrid > scores[b.image].boxes[b.box].score.d_hybrid;
  });

  QueryBatch batch;
  batch.cycle = pool.cycle;
  const std::size_t limit = proposal_limit(opts);
  std::map<ImageId, std::vector<BBox>> admitted;
  for (const auto& c : candidates) {
    if (batch.queries.size() >= limit) break;
    const ImageScores& img_scores = scores[c.image];
    const ScoredBox& sb = img_scores.boxes[c.box];
    const ImageRecord& img = dataset.at(img_scores.image_id);
    bool ok = true;
    for (std::size_t id : revealed_boxes(pool, img)) {
      if (iou(sb.reference.box, img.boxes[id].label.box) > opts.lambda_dedup) {
        ok = false;
        break;
      }
    }
    if (ok && opts.skip_verified_background) {
      const auto bg = pool.verified_background.find(img.id);
      if (bg != pool.verified_background.end()) {
        for (const auto& b : bg->second) {
          if (iou(sb.reference.box, b) > opts.lambda_dedup) {
            ok = false;
            break;
          }
        }
      }
    }
    auto& taken = admitted[img.id];
    if (ok) {
      for (const auto& b : taken) {
        if (iou(sb.reference.box, b) > opts.intra_batch_iou) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;
    taken.push_back(sb.reference.box);
    batch.queries.push_back({img.id, sb.reference.box, sb.score.d_hybrid, sb.reference.class_id});
  }
  return batch;
}

AnnotationResult simulated_oracle(const Query& query, const DatasetIndex& dataset,
                                  const PoolState& pool, double tau_match) {
  const ImageRecord& img = dataset.at(query.image_id);
  const auto revealed = revealed_boxes(pool, img);
  AnnotationResult r;
  r.image_id = query.image_id;
  r.box = query.box;
  double best = -1.0;
  std::optional<std::size_t> best_id;
  for (std::size_t b = 0; b < img.boxes.size(); ++b) {
    if (revealed.count(b)) continue;
    const double v = iou(query.box, img.boxes[b].label.box);
    if (v > best) {
      best = v;
      best_id = b;
    }
  }
  if (best_id && best >= tau_match) {
    r.kind = AnnotationResult::Kind::kMatched;
    r.box_id = *best_id;
    r.class_id = img.boxes[*best_id].label.class_id;
    r.box = img.boxes[*best_id].label.box;
  }
  return r;
}

bool budget_exhausted(const BudgetLedger& ledger, const CommitOptions& opts) {
  if (!opts.budget || ledger.entries.empty()) return false;
  return ledger.entries.back().spend() >= *opts.budget - 1e-12;
}

CommitStatus commit_annotation(const AnnotationResult& result, PoolState& pool, BudgetLedger& ledger,
                               const DatasetIndex& dataset, const CommitOptions& opts) {
  if (ledger.entries.empty()) throw IntegrityError("commit: no open ledger entry");
  LedgerEntry& entry = ledger.entries.back();
  const double charge = result.matched() ? 1.0 : opts.background_cost;
  if (opts.budget && entry.spend() + charge > *opts.budget + 1e-12) return CommitStatus::kBudgetExhausted;
  if (opts.budget && charge == 0.0 && budget_exhausted(ledger, opts)) return CommitStatus::kBudgetExhausted;

  const ImageRecord& img = dataset.at(result.image_id);
  if (!result.matched()) {
    pool.verified_background[img.id].push_back(result.box);
    entry.background_charged += charge;
    return CommitStatus::kApplied;
  }
  if (result.box_id >= img.boxes.size()) {
    throw IntegrityError("commit: image " + std::to_string(img.id) + " has no box " +
                         std::to_string(result.box_id));
  }
  if (pool.is_labeled(img.id) || (pool.is_sparse(img.id) && pool.sparse.at(img.id).count(result.box_id))) {
    throw IntegrityError("commit: box " + std::to_string(result.box_id) + " of image " +
                         std::to_string(img.id) + " is already revealed");
  }
  if (pool.is_unlabeled(img.id)) {
    pool.unlabeled.erase(img.id);
    pool.sparse[img.id] = {};
  }
  auto& revealed = pool.sparse[img.id];
  revealed.insert(result.box_id);
  if (revealed.size() == img.boxes.size()) {
    pool.sparse.erase(img.id);
    pool.fully_labeled.insert(img.id);
  }
  entry.boxes_charged += 1;
  entry.touched.insert(img.id);
  ledger.cumulative_boxes += 1;
  return CommitStatus::kApplied;
}

std::size_t commit_annotations(std::span<const AnnotationResult> results, PoolState& pool,
                               BudgetLedger& ledger, const DatasetIndex& dataset,
                               const CommitOptions& opts) {
  std::size_t applied = 0;
  for (const auto& r : results) {
    if (budget_exhausted(ledger, opts)) break;
    if (commit_annotation(r, pool, ledger, dataset, opts) != CommitStatus::kApplied) break;
    ++applied;
  }
  return applied;
}

std::vector<AnnotationResult> exhaustive_results(std::span<const ImageId> ranked,
                                                 const PoolState& pool, const DatasetIndex& dataset) {
  std::vector<AnnotationResult> out;
  for (ImageId id : ranked) {
    const ImageRecord& img = dataset.at(id);
    const auto revealed = revealed_boxes(pool, img);
    for (std::size_t b = 0; b < img.boxes.size(); ++b) {
      if (revealed.count(b)) continue;
      AnnotationResult r;
      r.kind = AnnotationResult::Kind::kMatched;
      r.image_id = id;
      r.box_id = b;
      r.class_id = img.boxes[b].label.class_id;
      r.box = img.boxes[b].label.box;
      r.annotator = "exhaustive";
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace boxald
