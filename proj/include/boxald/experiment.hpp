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
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boxald/config.hpp"
#include "boxald/dataset.hpp"
#include "boxald/ema.hpp"
#include "boxald/eval.hpp"
#include "boxald/pools.hpp"
#include "boxald/pseudo.hpp"
#include "boxald/scoring.hpp"
#include "boxald/simdet.hpp"

namespace boxald {

struct CycleReport {
  std::uint64_t seed = 0;
  int cycle = 0;
  std::string strategy;
  std::size_t cumulative_boxes = 0;
  std::size_t cycle_boxes = 0;
  std::size_t images_touched = 0;
  double background_charged = 0.0;
  std::size_t proposed = 0;  // queries (box protocol) or candidate images
  std::size_t images_labeled = 0;
  std::size_t images_sparse = 0;
  std::size_t images_unlabeled = 0;
  double map50 = 0.0;
  double map5095 = 0.0;
  double mean_score = 0.0;  // over acquired items
  double max_score = 0.0;
  double hard_fraction = 0.0;  // of boxes revealed this cycle
  double objective = 0.0;
  std::array<double, 5> score_quantiles{};

  friend bool operator==(const CycleReport&, const CycleReport&) = default;
};

struct HumanBox {
  ImageId image_id = 0;
  LabeledBox label;

  friend bool operator==(const HumanBox&, const HumanBox&) = default;
};

struct RankedImage {
  ImageId image_id = 0;
  double score = 0.0;

  friend bool operator==(const RankedImage&, const RankedImage&) = default;
};

// Acquisition state of the cycle currently being annotated.
struct OpenCycle {
  QueryBatch batch;                          // box protocol
  std::vector<bool> answered;                // aligned with batch.queries
  std::vector<bool> revealed_by_query;       // query produced a new label
  std::vector<RankedImage> ranked;           // image protocol
  std::vector<std::pair<ImageId, std::size_t>> revealed;  // boxes revealed this cycle
  bool force_closed = false;

  friend bool operator==(const OpenCycle&, const OpenCycle&) = default;
};

struct ExperimentState {
  std::uint64_t seed = 0;
  PoolState pool;
  BudgetLedger ledger;
  SimDetectorState detector;
  ParamVector chairman;
  std::vector<CycleReport> reports;
  std::vector<HumanBox> human_boxes;
  // Merged supervision of sparse images from the last closed cycle.
  std::map<ImageId, MergedSupervision> supervision;
  std::optional<OpenCycle> open;

  friend bool operator==(const ExperimentState&, const ExperimentState&) = default;
};

struct HumanDecision {
  bool accept = false;
  BBox box;  // used when accepting
  int class_id = 0;
  std::string annotator = "human";
};

enum class SubmitStatus { kApplied, kAlreadyAnswered, kBudgetExhausted, kNoOpenCycle, kUnknownQuery };

// One seeded experiment: dataset, pools, ledger, simulated detector and
// chairman, scored and annotated cycle by cycle. All mutation goes through
// this object, which is single-writer.
class Experiment {
 public:
  Experiment(RunConfig config, std::uint64_t seed);
  Experiment(RunConfig config, ExperimentState state);

  const RunConfig& config() const { return config_; }
  const DatasetIndex& dataset() const { return dataset_; }
  const DatasetIndex& test_set() const { return test_set_; }
  const ExperimentState& state() const { return state_; }
  int cycle() const { return state_.pool.cycle; }
  bool cycle_open() const { return state_.open.has_value(); }
  bool finished() const { return !cycle_open() && static_cast<std::size_t>(cycle()) >= config_.n_cycles; }

  // Scores S and U, proposes the next cycle's queries and opens its ledger
  // entry. Throws IntegrityError when a cycle is already open.
  const OpenCycle& begin_cycle();

  // Sequential commit of one answer to the open batch. Box protocol only.
  SubmitStatus submit_oracle(std::size_t query_index);
  SubmitStatus submit_human(std::size_t query_index, const HumanDecision& decision);

  bool budget_spent() const;
  // Budget spent, or every query answered / every image visited.
  bool cycle_complete() const;

  // Learns, updates the chairman, evaluates and appends a report. Throws
  // IntegrityError if the cycle is incomplete and not forced.
  const CycleReport& end_cycle(bool force = false);

  // Simulated oracle on every unanswered query in rank order (or the image
  // protocol's exhaustive labelling), then end_cycle(true).
  const CycleReport& complete_cycle();
  // begin_cycle + complete_cycle.
  const CycleReport& run_cycle();

  // Per-box committee scores of the most recent begin_cycle (box protocol).
  const std::vector<ImageScores>& current_box_scores() const { return box_scores_; }
  // Score samples of the most recently closed cycle, split labeled/unlabeled.
  const std::vector<ScoreSample>& last_score_samples() const { return samples_; }

  SimDetector detector() const;
  SimDetector chairman() const;
  EvalResult evaluate() const;
  CommitOptions commit_options() const;

 private:
  void load_datasets();
  std::vector<ImageId> candidate_images() const;
  std::vector<RankedImage> rank_images(int cycle) const;
  void apply_image_protocol();
  SubmitStatus commit_query(std::size_t query_index, const AnnotationResult& result);
  PseudoLabels build_pseudo_labels(int cycle);
  double objective() const;

  RunConfig config_;
  DatasetIndex dataset_;
  DatasetIndex test_set_;
  ExperimentState state_;
  std::vector<ImageScores> box_scores_;
  std::vector<ScoreSample> samples_;
};

}  // namespace boxald
