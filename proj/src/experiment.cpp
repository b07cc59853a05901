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
#include "boxald/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "boxald/errors.hpp"
#include "boxald/io.hpp"
#include "boxald/rng.hpp"

namespace boxald {

namespace {

// Seed-derivation tags, one per random stream.
enum : std::uint64_t {
  kTagData = 0xD47A,
  kTagTest = 0x7E57,
  kTagScore = 0x5C0E,
  kTagRank = 0x4A4B,
  kTagPseudo = 0x95E0,
  kTagJitter = 0x1177,
  kTagLoss = 0x1055,
  kTagEval = 0xE7A1,
};

constexpr ImageId kTestIdOffset = 10'000'000;

std::vector<LabeledBox> revealed_labels(const PoolState& pool, const ImageRecord& img) {
  std::vector<LabeledBox> out;
  for (std::size_t b : revealed_boxes(pool, img)) out.push_back(img.boxes[b].label);
  return out;
}

}  // namespace

Experiment::Experiment(RunConfig config, std::uint64_t seed) : config_(std::move(config)) {
  validate(config_);
  state_.seed = seed;
  load_datasets();
  auto [pool, ledger] = init_pool(dataset_, config_.init_budget, seed);
  state_.pool = std::move(pool);
  state_.ledger = std::move(ledger);
  state_.detector = learn(SimDetectorState::fresh(dataset_.num_classes(), config_.sim, seed), state_.pool, dataset_);
  state_.chairman = state_.detector.to_param_vector();
}

Experiment::Experiment(RunConfig config, ExperimentState state)
    : config_(std::move(config)), state_(std::move(state)) {
  validate(config_);
  load_datasets();
  for (const auto& hb : state_.human_boxes) {
    GroundTruthBox gt;
    gt.label = hb.label;
    dataset_.add_box(hb.image_id, gt);
  }
  check_partition(state_.pool, dataset_);
  if (state_.ledger.cumulative_boxes != count_revealed(state_.pool, dataset_)) {
    throw SnapshotError("snapshot: ledger total does not match the revealed boxes");
  }
  if (state_.detector.class_counts.size() != static_cast<std::size_t>(dataset_.num_classes())) {
    throw SnapshotError("snapshot: detector state does not match the dataset's classes");
  }
}

void Experiment::load_datasets() {
  const std::uint64_t seed = state_.seed;
  if (!config_.dataset_path.empty()) {
    dataset_ = ingest_coco(config_.dataset_path).index;
    test_set_ = config_.test_path.empty() ? dataset_ : ingest_coco(config_.test_path).index;
    return;
  }
  dataset_ = synthesize(config_.synth, derive_seed(seed, {kTagData})).index;
  if (!config_.test_path.empty()) {
    test_set_ = ingest_coco(config_.test_path).index;
    return;
  }
  SynthOptions test = config_.synth;
  test.n_images = config_.test_images;
  test.first_id = kTestIdOffset;
  test_set_ = test.n_images == 0 ? dataset_ : synthesize(test, derive_seed(seed, {kTagTest})).index;
}

SimDetector Experiment::detector() const { return SimDetector(state_.detector, 0.0); }

SimDetector Experiment::chairman() const {
  return SimDetector(state_.detector.with_param_vector(state_.chairman), 0.0);
}

CommitOptions Experiment::commit_options() const {
  CommitOptions o;
  if (config_.budget_unit == BudgetUnit::kBoxes) o.budget = static_cast<double>(config_.per_cycle_budget);
  o.background_cost = config_.background_cost;
  return o;
}

std::vector<ImageId> Experiment::candidate_images() const {
  std::vector<ImageId> out;
  for (const auto& img : dataset_.images()) {
    if (!state_.pool.is_labeled(img.id)) out.push_back(img.id);
  }
  return out;
}

std::vector<RankedImage> Experiment::rank_images(int cycle) const {
  const std::uint64_t seed = state_.seed;
  const auto cyc = static_cast<std::uint64_t>(cycle);
  const auto candidates = candidate_images();
  const SimDetector det = detector();
  std::vector<RankedImage> ranked;
  ranked.reserve(candidates.size());

  auto predictions = [&](const ImageRecord& img) {
    auto preds = det.predict(img, AffineView::identity(img.width),
                             derive_seed(seed, {cyc, kTagRank, static_cast<std::uint64_t>(img.id)}));
    std::vector<LabeledBox> kept;
    for (std::size_t k : nms(preds, config_.nms_iou, false)) kept.push_back(preds[k]);
    return kept;
  };

  switch (config_.strategy) {
    case Strategy::kRandom:
      for (ImageId id : candidates) ranked.push_back({id, random_score(derive_seed(seed, {cyc}), id)});
      break;
    case Strategy::kMeanEntropy:
      for (ImageId id : candidates) ranked.push_back({id, mean_entropy_score(predictions(dataset_.at(id)))});
      break;
    case Strategy::kBoxCnt:
      for (ImageId id : candidates) {
        ranked.push_back({id, static_cast<double>(box_count_score(predictions(dataset_.at(id)), config_.boxcnt_floor))});
      }
      break;
    case Strategy::kCoreSet: {
      std::vector<ImageFeature> features;
      std::vector<std::size_t> selected;
      std::vector<std::size_t> candidate_pos;
      std::size_t empty_candidates = 0;
      features.reserve(dataset_.size());
      for (std::size_t p = 0; p < dataset_.size(); ++p) {
        const ImageRecord& img = dataset_.images()[p];
        features.push_back(image_feature(predictions(img), dataset_.num_classes(), img.width, img.height));
        if (state_.pool.is_labeled(img.id)) {
          selected.push_back(p);
        } else {
          candidate_pos.push_back(p);
          if (img.boxes.empty()) ++empty_candidates;
        }
      }
      if (selected.empty() || candidate_pos.empty()) {
        for (std::size_t p : candidate_pos) ranked.push_back({dataset_.images()[p].id, 0.0});
        break;
      }
      const std::size_t need = config_.per_cycle_budget +
                               (config_.budget_unit == BudgetUnit::kBoxes ? empty_candidates : 0);
      const std::size_t k = std::min(need, candidate_pos.size());
      const auto picks = k_center_greedy(features, selected, k);
      for (std::size_t r = 0; r < picks.size(); ++r) {
        ranked.push_back({dataset_.images()[picks[r]].id, static_cast<double>(picks.size() - r)});
      }
      break;
    }
    case Strategy::kCompas:
      throw ConfigError("compas ranks boxes, not images");
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedImage& a, const RankedImage& b) { return a.score > b.score; });
  return ranked;
}

const OpenCycle& Experiment::begin_cycle() {
  if (state_.open) throw IntegrityError("experiment: cycle " + std::to_string(cycle()) + " is still open");
  const int cyc = ++state_.pool.cycle;
  state_.ledger.open(cyc);
  OpenCycle oc;
  box_scores_.clear();

  if (config_.effective_protocol() == Protocol::kBox) {
    const std::uint64_t score_seed = derive_seed(state_.seed, {static_cast<std::uint64_t>(cyc), kTagScore});
    const SimDetector chair = chairman();
    const SimDetector members(state_.detector, config_.member_noise);
    CommitteeOptions opts;
    opts.members = config_.committee_size;
    opts.tau_assign = config_.tau_assign;
    opts.class_aware = config_.class_aware_assign;
    opts.views = config_.views;
    opts.ceiling = config_.ceiling_score;
    for (ImageId id : candidate_images()) {
      const ImageRecord& img = dataset_.at(id);
      if (config_.strategy == Strategy::kCompas) {
        box_scores_.push_back(score_image(img, chair, members, opts, score_seed));
        continue;
      }
      ImageScores s;
      s.image_id = id;
      const auto refs = chair.predict(img, AffineView::identity(img.width),
                                      derive_seed(score_seed, {static_cast<std::uint64_t>(id), 0}));
      for (std::size_t b = 0; b < refs.size(); ++b) {
        BoxScore bs;
        bs.ref_index = b;
        Rng rng(derive_seed(score_seed, {static_cast<std::uint64_t>(id), b, kTagRank}));
        bs.d_hybrid = rng.uniform();
        s.boxes.push_back({refs[b], bs});
      }
      box_scores_.push_back(std::move(s));
    }
    if (config_.strategy == Strategy::kCompas) apply_ceiling(box_scores_, config_.ceiling_score);
    ProposalOptions popts;
    popts.per_cycle_budget = config_.per_cycle_budget;
    popts.lambda_dedup = config_.lambda_dedup;
    popts.intra_batch_iou = config_.intra_batch_iou;
    popts.over_provision = config_.over_provision;
    oc.batch = propose_queries(box_scores_, state_.pool, dataset_, popts);
    oc.batch.cycle = cyc;
    oc.answered.assign(oc.batch.queries.size(), false);
    oc.revealed_by_query.assign(oc.batch.queries.size(), false);
  } else {
    oc.ranked = rank_images(cyc);
  }
  state_.open = std::move(oc);
  return *state_.open;
}

bool Experiment::budget_spent() const { return budget_exhausted(state_.ledger, commit_options()); }

bool Experiment::cycle_complete() const {
  if (!state_.open) return false;
  const OpenCycle& oc = *state_.open;
  if (oc.force_closed || budget_spent()) return true;
  if (config_.effective_protocol() == Protocol::kImage) return false;
  return std::all_of(oc.answered.begin(), oc.answered.end(), [](bool a) { return a; });
}

SubmitStatus Experiment::commit_query(std::size_t query_index, const AnnotationResult& result) {
  OpenCycle& oc = *state_.open;
  const CommitStatus status = commit_annotation(result, state_.pool, state_.ledger, dataset_, commit_options());
  if (status == CommitStatus::kBudgetExhausted) return SubmitStatus::kBudgetExhausted;
  oc.answered[query_index] = true;
  if (result.matched()) {
    oc.revealed_by_query[query_index] = true;
    oc.revealed.emplace_back(result.image_id, result.box_id);
  }
  return SubmitStatus::kApplied;
}

SubmitStatus Experiment::submit_oracle(std::size_t query_index) {
  if (!state_.open || config_.effective_protocol() != Protocol::kBox) return SubmitStatus::kNoOpenCycle;
  const OpenCycle& oc = *state_.open;
  if (query_index >= oc.batch.queries.size()) return SubmitStatus::kUnknownQuery;
  if (oc.answered[query_index]) return SubmitStatus::kAlreadyAnswered;
  if (budget_spent()) return SubmitStatus::kBudgetExhausted;
  const AnnotationResult r =
      simulated_oracle(oc.batch.queries[query_index], dataset_, state_.pool, config_.tau_match);
  return commit_query(query_index, r);
}

SubmitStatus Experiment::submit_human(std::size_t query_index, const HumanDecision& decision) {
  if (!state_.open || config_.effective_protocol() != Protocol::kBox) return SubmitStatus::kNoOpenCycle;
  const OpenCycle& oc = *state_.open;
  if (query_index >= oc.batch.queries.size()) return SubmitStatus::kUnknownQuery;
  if (oc.answered[query_index]) return SubmitStatus::kAlreadyAnswered;
  if (budget_spent()) return SubmitStatus::kBudgetExhausted;
  const Query& q = oc.batch.queries[query_index];

  AnnotationResult r;
  r.image_id = q.image_id;
  r.annotator = decision.annotator;
  r.box = q.box;
  if (!decision.accept) {
    r.kind = AnnotationResult::Kind::kBackground;
    return commit_query(query_index, r);
  }
  if (!decision.box.valid()) throw ConfigError("annotation: accepted box is degenerate");
  if (decision.class_id < 0 || decision.class_id >= dataset_.num_classes()) {
    throw ConfigError("annotation: unknown class " + std::to_string(decision.class_id));
  }
  Query probe = q;
  probe.box = decision.box;
  r = simulated_oracle(probe, dataset_, state_.pool, config_.tau_match);
  r.annotator = decision.annotator;
  if (!r.matched()) {
    // A target the dataset does not know yet becomes a new human label.
    const auto opts = commit_options();
    if (opts.budget && state_.ledger.entries.back().spend() + 1.0 > *opts.budget + 1e-12) {
      return SubmitStatus::kBudgetExhausted;
    }
    GroundTruthBox gt;
    gt.label.box = decision.box;
    gt.label.class_id = decision.class_id;
    r.kind = AnnotationResult::Kind::kMatched;
    r.box_id = dataset_.add_box(q.image_id, gt);
    r.class_id = decision.class_id;
    r.box = decision.box;
    state_.human_boxes.push_back({q.image_id, gt.label});
  }
  return commit_query(query_index, r);
}

void Experiment::apply_image_protocol() {
  OpenCycle& oc = *state_.open;
  const CommitOptions opts = commit_options();
  const bool count_images = config_.budget_unit == BudgetUnit::kImages;
  std::size_t images = 0;
  for (const auto& ri : oc.ranked) {
    if (count_images && images >= config_.per_cycle_budget) break;
    if (budget_spent()) break;
    ++images;
    const ImageId id = ri.image_id;
    const auto results = exhaustive_results(std::span<const ImageId>(&id, 1), state_.pool, dataset_);
    for (const auto& r : results) {
      if (commit_annotation(r, state_.pool, state_.ledger, dataset_, opts) != CommitStatus::kApplied) break;
      oc.revealed.emplace_back(r.image_id, r.box_id);
    }
  }
  oc.force_closed = true;
}

PseudoLabels Experiment::build_pseudo_labels(int cycle) {
  PseudoLabels pseudo;
  state_.supervision.clear();
  if (!config_.effective_pseudo_labels()) return pseudo;
  const SimDetector chair = chairman();
  const bool mixed = config_.supervision == Supervision::kMixed;
  const auto cyc = static_cast<std::uint64_t>(cycle);
  for (const auto& img : dataset_.images()) {
    const bool sparse = state_.pool.is_sparse(img.id);
    if (!sparse && !(mixed && state_.pool.is_unlabeled(img.id))) continue;
    const auto id = static_cast<std::uint64_t>(img.id);
    const auto preds = chair.predict(img, AffineView::identity(img.width),
                                     derive_seed(state_.seed, {cyc, kTagPseudo, id}));
    PseudoSet ps;
    ps.cls_pseudo = filter_cls_pseudo(preds, config_.lambda_c);
    const Refiner refiner = [&](const BBox& b) { return chair.refine(b, img); };
    ps.loc_pseudo = filter_loc_pseudo(preds, refiner, config_.lambda_r, config_.jitter,
                                      derive_seed(state_.seed, {cyc, kTagJitter, id}));
    const auto human = revealed_labels(state_.pool, img);
    MergedSupervision merged = merge_supervision(human, ps, config_.lambda_g);
    auto& out = pseudo[img.id];
    for (const auto& e : merged.class_targets) {
      if (e.provenance == Provenance::kPseudo) out.push_back(e.label);
    }
    if (sparse) state_.supervision.emplace(img.id, std::move(merged));
  }
  return pseudo;
}

double Experiment::objective() const {
  const SimDetector det = detector();
  const auto cyc = static_cast<std::uint64_t>(cycle());
  auto loss = [&](const ImageRecord& img, std::span<const LabeledBox> targets) {
    return proxy_loss(det, img, targets, derive_seed(state_.seed, {cyc, kTagLoss, static_cast<std::uint64_t>(img.id)}));
  };
  double l_l = 0.0, l_s = 0.0, l_u = 0.0;
  std::size_t n_l = 0, n_s = 0, n_u = 0;
  const bool mixed = config_.supervision == Supervision::kMixed;
  for (const auto& img : dataset_.images()) {
    if (state_.pool.is_labeled(img.id)) {
      std::vector<LabeledBox> targets;
      for (const auto& b : img.boxes) targets.push_back(b.label);
      l_l += loss(img, targets);
      ++n_l;
    } else if (state_.pool.is_sparse(img.id)) {
      std::vector<LabeledBox> targets;
      const auto it = state_.supervision.find(img.id);
      if (it != state_.supervision.end()) {
        for (const auto& e : it->second.class_targets) targets.push_back(e.label);
      } else {
        targets = revealed_labels(state_.pool, img);
      }
      l_s += loss(img, targets);
      ++n_s;
    } else if (mixed) {
      ++n_u;
    }
  }
  if (n_l == 0) return 0.0;
  if (n_s > 0) l_s /= static_cast<double>(n_s);
  l_l /= static_cast<double>(n_l);
  if (mixed && n_u > 0) {
    // Unlabeled images are supervised by the chairman's confident boxes only.
    const SimDetector chair = chairman();
    for (const auto& img : dataset_.images()) {
      if (!state_.pool.is_unlabeled(img.id)) continue;
      const auto preds = chair.predict(img, AffineView::identity(img.width),
                                       derive_seed(state_.seed, {cyc, kTagPseudo, static_cast<std::uint64_t>(img.id)}));
      l_u += loss(img, filter_cls_pseudo(preds, config_.lambda_c));
    }
    l_u /= static_cast<double>(n_u);
  }
  return compose_objective(l_l, l_s, l_u, n_l, n_s, n_u, mixed).total;
}

EvalResult Experiment::evaluate() const {
  const SimDetector det = detector();
  std::vector<ImageDetections> preds;
  std::vector<ImageDetections> gts;
  preds.reserve(test_set_.size());
  gts.reserve(test_set_.size());
  for (const auto& img : test_set_.images()) {
    preds.push_back({img.id, det.predict(img, AffineView::identity(img.width),
                                         derive_seed(state_.seed, {kTagEval, static_cast<std::uint64_t>(img.id)}))});
    ImageDetections g{img.id, {}};
    for (const auto& b : img.boxes) g.boxes.push_back(b.label);
    gts.push_back(std::move(g));
  }
  return map_scores(preds, gts, test_set_.num_classes());
}

const CycleReport& Experiment::end_cycle(bool force) {
  if (!state_.open) throw IntegrityError("experiment: no open cycle");
  if (!cycle_complete() && !force) {
    throw IntegrityError("experiment: cycle " + std::to_string(cycle()) + " is incomplete");
  }
  OpenCycle& oc = *state_.open;
  const int cyc = cycle();

  const PseudoLabels pseudo = build_pseudo_labels(cyc);
  state_.detector = learn(state_.detector, state_.pool, dataset_, pseudo);
  state_.chairman = ema_update_n(state_.chairman, state_.detector.to_param_vector(), config_.ema_alpha,
                                 config_.ema_steps);
  const EvalResult eval = evaluate();

  samples_.clear();
  std::vector<double> acquired;
  if (config_.effective_protocol() == Protocol::kBox) {
    for (std::size_t q = 0; q < oc.batch.queries.size(); ++q) {
      const bool labeled = oc.revealed_by_query[q];
      samples_.push_back({cyc, labeled ? "labeled" : "unlabeled", oc.batch.queries[q].score});
      if (labeled) acquired.push_back(oc.batch.queries[q].score);
    }
  } else {
    std::set<ImageId> touched;
    const LedgerEntry* entry = state_.ledger.find(cyc);
    if (entry != nullptr) touched = entry->touched;
    for (const auto& ri : oc.ranked) {
      const bool labeled = touched.count(ri.image_id) != 0;
      samples_.push_back({cyc, labeled ? "labeled" : "unlabeled", ri.score});
      if (labeled) acquired.push_back(ri.score);
    }
  }

  CycleReport rep;
  rep.seed = state_.seed;
  rep.cycle = cyc;
  rep.strategy = std::string(to_string(config_.strategy));
  rep.cumulative_boxes = state_.ledger.cumulative_boxes;
  if (const LedgerEntry* e = state_.ledger.find(cyc)) {
    rep.cycle_boxes = e->boxes_charged;
    rep.images_touched = e->images_touched();
    rep.background_charged = e->background_charged;
  }
  rep.proposed = config_.effective_protocol() == Protocol::kBox ? oc.batch.queries.size() : oc.ranked.size();
  rep.images_labeled = state_.pool.fully_labeled.size();
  rep.images_sparse = state_.pool.sparse.size();
  rep.images_unlabeled = state_.pool.unlabeled.size();
  rep.map50 = eval.map50;
  rep.map5095 = eval.map5095;
  if (!acquired.empty()) {
    rep.mean_score = std::accumulate(acquired.begin(), acquired.end(), 0.0) / static_cast<double>(acquired.size());
    rep.max_score = *std::max_element(acquired.begin(), acquired.end());
    rep.score_quantiles = five_number_summary(acquired);
  }
  std::size_t hard = 0;
  for (const auto& [id, box] : oc.revealed) {
    if (dataset_.at(id).boxes[box].difficulty >= kHardDifficulty) ++hard;
  }
  rep.hard_fraction = oc.revealed.empty() ? 0.0 : static_cast<double>(hard) / static_cast<double>(oc.revealed.size());
  state_.open.reset();
  rep.objective = objective();
  state_.reports.push_back(rep);
  return state_.reports.back();
}

const CycleReport& Experiment::complete_cycle() {
  if (!state_.open) throw IntegrityError("experiment: no open cycle");
  if (config_.effective_protocol() == Protocol::kBox) {
    const std::size_t n = state_.open->batch.queries.size();
    for (std::size_t q = 0; q < n; ++q) {
      if (budget_spent()) break;
      if (state_.open->answered[q]) continue;
      if (submit_oracle(q) == SubmitStatus::kBudgetExhausted) break;
    }
  } else if (!state_.open->force_closed) {
    apply_image_protocol();
  }
  return end_cycle(true);
}

const CycleReport& Experiment::run_cycle() {
  begin_cycle();
  return complete_cycle();
}

}  // namespace boxald
