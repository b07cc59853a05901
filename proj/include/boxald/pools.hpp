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
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "boxald/dataset.hpp"
#include "boxald/geometry.hpp"
#include "boxald/scoring.hpp"

namespace boxald {

// Partition of the dataset into fully labeled (L), sparsely labeled (S) and
// unlabeled (U) images.
struct PoolState {
  int cycle = 0;
  std::set<ImageId> fully_labeled;
  std::map<ImageId, std::set<std::size_t>> sparse;  // image -> revealed box ids
  std::set<ImageId> unlabeled;
  std::map<ImageId, std::vector<BBox>> verified_background;

  bool is_labeled(ImageId id) const { return fully_labeled.count(id) != 0; }
  bool is_sparse(ImageId id) const { return sparse.count(id) != 0; }
  bool is_unlabeled(ImageId id) const { return unlabeled.count(id) != 0; }

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

// Box ids of `image` whose labels are known.
std::set<std::size_t> revealed_boxes(const PoolState& pool, const ImageRecord& image);
std::size_t count_revealed(const PoolState& pool, const DatasetIndex& dataset);

// Throws IntegrityError when L / S / U do not partition the dataset or a
// revealed id is out of range.
void check_partition(const PoolState& pool, const DatasetIndex& dataset);

struct LedgerEntry {
  int cycle = 0;
  std::size_t boxes_charged = 0;
  double background_charged = 0.0;
  std::set<ImageId> touched;

  std::size_t images_touched() const { return touched.size(); }
  double spend() const { return static_cast<double>(boxes_charged) + background_charged; }

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct BudgetLedger {
  std::vector<LedgerEntry> entries;
  std::size_t cumulative_boxes = 0;
  // Boxes charged at initialization beyond the requested initial budget.
  std::size_t init_overshoot = 0;

  LedgerEntry& open(int cycle);
  const LedgerEntry* find(int cycle) const;

  friend bool operator==(const BudgetLedger&, const BudgetLedger&) = default;
};

struct Query {
  ImageId image_id = 0;
  BBox box;
  double score = 0.0;
  int class_id = 0;  // chairman's suggested class

  friend bool operator==(const Query&, const Query&) = default;
};

struct QueryBatch {
  int cycle = 0;
  std::vector<Query> queries;

  friend bool operator==(const QueryBatch&, const QueryBatch&) = default;
};

struct AnnotationResult {
  enum class Kind { kMatched, kBackground };
  Kind kind = Kind::kBackground;
  ImageId image_id = 0;
  std::size_t box_id = 0;  // valid when matched
  int class_id = 0;
  BBox box;                // matched box, or the rejected query box
  std::string annotator = "simulated";

  bool matched() const { return kind == Kind::kMatched; }
};

// Randomly moves whole images U -> L until at least `init_budget` boxes are
// labeled. Throws ConfigError if the dataset has fewer boxes than requested.
std::pair<PoolState, BudgetLedger> init_pool(const DatasetIndex& dataset, std::size_t init_budget,
                                             std::uint64_t seed);

struct ProposalOptions {
  std::size_t per_cycle_budget = 1000;
  double lambda_dedup = 0.4;
  double intra_batch_iou = 0.5;
  double over_provision = 1.5;
  // Also skip candidates overlapping a verified background box above
  // lambda_dedup.
  bool skip_verified_background = true;
};

std::size_t proposal_limit(const ProposalOptions& opts);

QueryBatch propose_queries(std::span<const ImageScores> scores, const PoolState& pool,
                           const DatasetIndex& dataset, const ProposalOptions& opts);

AnnotationResult simulated_oracle(const Query& query, const DatasetIndex& dataset,
                                  const PoolState& pool, double tau_match = 0.5);

struct CommitOptions {
  // Spend cap for the open cycle; nullopt = uncapped (image-count budgets).
  std::optional<double> budget;
  double background_cost = 0.0;
};

enum class CommitStatus { kApplied, kBudgetExhausted };

// Applies one result to the latest ledger entry and the pool.
CommitStatus commit_annotation(const AnnotationResult& result, PoolState& pool, BudgetLedger& ledger,
                               const DatasetIndex& dataset, const CommitOptions& opts);

// True when the open cycle has spent its whole budget.
bool budget_exhausted(const BudgetLedger& ledger, const CommitOptions& opts);

// Processes results in order until the budget is spent. Returns the number
// applied.
std::size_t commit_annotations(std::span<const AnnotationResult> results, PoolState& pool,
                               BudgetLedger& ledger, const DatasetIndex& dataset,
                               const CommitOptions& opts);

// Exhaustive image-level annotation: every unrevealed box of each image in
// `ranked`, image by image.
std::vector<AnnotationResult> exhaustive_results(std::span<const ImageId> ranked,
                                                 const PoolState& pool, const DatasetIndex& dataset);

}  // namespace boxald
