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
#include <algorithm>
#include <random>

#include "doctest.h"

#include "boxald/errors.hpp"
#include "boxald/experiment.hpp"
#include "boxald/pools.hpp"
#include "boxald/simdet.hpp"

using namespace boxald;

namespace {

GroundTruthBox gt(BBox b, int cls = 0) {
  GroundTruthBox g;
  g.label.box = b;
  g.label.class_id = cls;
  return g;
}

DatasetIndex grid_dataset(std::size_t images, std::size_t boxes_per_image) {
  std::vector<ImageRecord> recs;
  for (std::size_t i = 0; i < images; ++i) {
    ImageRecord r;
    r.id = static_cast<ImageId>(i + 1);
    r.width = 200;
    r.height = 100;
    for (std::size_t b = 0; b < boxes_per_image; ++b) r.boxes.push_back(gt({b * 30.0, 0, b * 30.0 + 20, 20}));
    recs.push_back(r);
  }
  return DatasetIndex(recs, {{0, "thing", 1}});
}

ImageScores scored(ImageId id, std::vector<std::pair<BBox, double>> boxes) {
  ImageScores s;
  s.image_id = id;
  for (const auto& [b, v] : boxes) {
    BoxScore sc;
    sc.d_hybrid = v;
    s.boxes.push_back({LabeledBox::from_distribution(b, {1.0}), sc});
  }
  return s;
}

// Recomputes the revealed-box count from scratch.
std::size_t recount(const PoolState& pool, const DatasetIndex& ds) {
  std::size_t n = 0;
  for (const auto& img : ds.images()) {
    if (pool.is_labeled(img.id)) n += img.boxes.size();
    if (pool.is_sparse(img.id)) n += pool.sparse.at(img.id).size();
  }
  return n;
}

}  // namespace

TEST_CASE("init pool") {
  const auto ds = grid_dataset(3, 2);
  auto [pool, ledger] = init_pool(ds, 4, 7);
  CHECK(pool.fully_labeled.size() == 2);
  CHECK(pool.unlabeled.size() == 1);
  CHECK(ledger.cumulative_boxes == 4);
  CHECK(ledger.init_overshoot == 0);
  check_partition(pool, ds);

  auto [p3, l3] = init_pool(ds, 3, 7);
  CHECK(l3.cumulative_boxes == 4);
  CHECK(l3.init_overshoot == 1);

  auto [all, lall] = init_pool(ds, 6, 1);
  CHECK(all.fully_labeled.size() == 3);
  CHECK(all.unlabeled.empty());
  CHECK(lall.cumulative_boxes == 6);

  CHECK_THROWS_AS(init_pool(ds, 7, 1), ConfigError);
  CHECK_THROWS_AS(init_pool(ds, 0, 1), ConfigError);
  CHECK(init_pool(ds, 4, 7).first == init_pool(ds, 4, 7).first);
}

TEST_CASE("init at VOC scale has bounded overshoot") {
  SynthOptions so;
  so.n_images = 5000;
  so.num_classes = 20;
  so.mean_boxes = 3.0;
  const auto ds = synthesize(so, 3).index;
  std::size_t max_boxes = 0;
  for (const auto& img : ds.images()) max_boxes = std::max(max_boxes, img.boxes.size());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [pool, ledger] = init_pool(ds, 3000, seed);
    CHECK(ledger.cumulative_boxes >= 3000);
    CHECK(ledger.cumulative_boxes - 3000 < max_boxes);
    CHECK(ledger.init_overshoot == ledger.cumulative_boxes - 3000);
    CHECK(recount(pool, ds) == ledger.cumulative_boxes);
  }
}

TEST_CASE("partition check") {
  const auto ds = grid_dataset(3, 2);
  PoolState pool;
  pool.fully_labeled = {1};
  pool.unlabeled = {2, 3};
  check_partition(pool, ds);
  pool.unlabeled.insert(1);
  CHECK_THROWS_AS(check_partition(pool, ds), IntegrityError);
  pool.unlabeled = {2};
  CHECK_THROWS_AS(check_partition(pool, ds), IntegrityError);
  pool.sparse[3] = {5};
  CHECK_THROWS_AS(check_partition(pool, ds), IntegrityError);
}

TEST_CASE("proposal dedup and provisioning") {
  std::vector<ImageRecord> recs(1);
  recs[0].id = 1;
  recs[0].width = recs[0].height = 500;
  recs[0].boxes = {gt({0, 0, 10, 10})};
  const DatasetIndex ds(recs, {{0, "a", 1}});
  PoolState pool;
  pool.sparse[1] = {0};

  // IoU of [0,10] and [s,s+10] is 0.5 at s = 10/3.
  const BBox overlap{10.0 / 3, 0, 10 + 10.0 / 3, 10};
  ProposalOptions opts;
  opts.per_cycle_budget = 10;
  auto batch = propose_queries(std::vector<ImageScores>{scored(1, {{overlap, 1.0}, {{100, 100, 120, 120}, 0.5}})},
                               pool, ds, opts);
  REQUIRE(batch.queries.size() == 1);
  CHECK(batch.queries[0].box == BBox{100, 100, 120, 120});

  // Two equal-score overlapping candidates: one admitted.
  batch = propose_queries(
      std::vector<ImageScores>{scored(1, {{{200, 200, 240, 240}, 0.7}, {{201, 200, 241, 240}, 0.7}})}, pool, ds,
      opts);
  CHECK(batch.queries.size() == 1);

  // Ample candidates: 1.5 x budget admitted, best first.
  std::vector<ImageRecord> many;
  std::vector<ImageScores> scores;
  PoolState up;
  for (int i = 0; i < 2000; ++i) {
    ImageRecord r;
    r.id = i + 1;
    r.width = r.height = 100;
    many.push_back(r);
    up.unlabeled.insert(r.id);
    scores.push_back(scored(r.id, {{{10, 10, 50, 50}, 1.0 / (i + 1)}}));
  }
  const DatasetIndex big(many, {{0, "a", 1}});
  opts.per_cycle_budget = 1000;
  batch = propose_queries(scores, up, big, opts);
  CHECK(proposal_limit(opts) == 1500);
  REQUIRE(batch.queries.size() == 1500);
  CHECK(batch.queries.front().image_id == 1);
  CHECK(batch.queries.back().image_id == 1500);
  CHECK(propose_queries(std::vector<ImageScores>{}, up, big, opts).queries.empty());
}

TEST_CASE("simulated oracle") {
  std::vector<ImageRecord> recs(1);
  recs[0].id = 1;
  recs[0].width = recs[0].height = 100;
  // Query (0,0,10,10); IoU 0.6 with a box shifted 2.5, 0.8 with one shifted 10/9.
  recs[0].boxes = {gt({2.5, 0, 12.5, 10}, 0), gt({-10.0 / 9, 0, 10 - 10.0 / 9, 10}, 1), gt({50, 50, 60, 60}, 0)};
  const DatasetIndex ds(recs, {{0, "a", 1}, {1, "b", 2}});
  PoolState pool;
  pool.unlabeled = {1};
  Query q{1, {0, 0, 10, 10}, 1.0, 0};
  auto r = simulated_oracle(q, ds, pool);
  CHECK(r.matched());
  CHECK(r.box_id == 1);
  CHECK(r.class_id == 1);

  q.box = {50, 50, 60, 60};
  r = simulated_oracle(q, ds, pool);
  CHECK(r.box_id == 2);
  CHECK(r.box == q.box);

  // IoU 0.3 with (50,50,60,60) via a 5-wide overlap: 50 / (150 + ...).
  q.box = {55, 50, 65, 60};  // IoU 50 / 150
  r = simulated_oracle(q, ds, pool);
  CHECK_FALSE(r.matched());
  CHECK(r.box == q.box);

  // Revealed boxes are not matched again.
  pool.unlabeled.clear();
  pool.sparse[1] = {1};
  q.box = {0, 0, 10, 10};
  r = simulated_oracle(q, ds, pool);
  CHECK(r.box_id == 0);
}

TEST_CASE("commit transitions and budget cap") {
  const auto ds = grid_dataset(2, 3);
  PoolState pool;
  pool.unlabeled = {1, 2};
  BudgetLedger ledger;
  ledger.open(1);
  CommitOptions opts;
  opts.budget = 4.0;
  auto results = exhaustive_results(std::vector<ImageId>{1, 2}, pool, ds);
  REQUIRE(results.size() == 6);

  CHECK(commit_annotation(results[0], pool, ledger, ds, opts) == CommitStatus::kApplied);
  CHECK(pool.is_sparse(1));
  CHECK_FALSE(pool.is_unlabeled(1));
  CHECK(commit_annotation(results[1], pool, ledger, ds, opts) == CommitStatus::kApplied);
  CHECK(commit_annotation(results[2], pool, ledger, ds, opts) == CommitStatus::kApplied);
  CHECK(pool.is_labeled(1));
  CHECK_FALSE(pool.is_sparse(1));
  CHECK_THROWS_AS(commit_annotation(results[2], pool, ledger, ds, opts), IntegrityError);

  std::vector<AnnotationResult> rest(results.begin() + 3, results.end());
  CHECK(commit_annotations(rest, pool, ledger, ds, opts) == 1);
  CHECK(ledger.entries.back().boxes_charged == 4);
  CHECK(budget_exhausted(ledger, opts));
  check_partition(pool, ds);
  CHECK(recount(pool, ds) == ledger.cumulative_boxes);

  // Background at zero cost leaves the charge unchanged and is remembered.
  PoolState p2;
  p2.unlabeled = {1, 2};
  BudgetLedger l2;
  l2.open(1);
  AnnotationResult bg;
  bg.image_id = 2;
  bg.box = {1, 1, 5, 5};
  CHECK(commit_annotation(bg, p2, l2, ds, CommitOptions{}) == CommitStatus::kApplied);
  CHECK(l2.entries.back().spend() == 0.0);
  CHECK(p2.verified_background.at(2).size() == 1);
  CHECK(p2.is_unlabeled(2));

  BudgetLedger none;
  CHECK_THROWS_AS(commit_annotation(bg, p2, none, ds, CommitOptions{}), IntegrityError);
}

TEST_CASE("background cost is charged") {
  const auto ds = grid_dataset(1, 1);
  PoolState pool;
  pool.unlabeled = {1};
  BudgetLedger ledger;
  ledger.open(1);
  CommitOptions opts;
  opts.budget = 1.0;
  opts.background_cost = 0.5;
  AnnotationResult bg;
  bg.image_id = 1;
  bg.box = {100, 50, 110, 60};
  CHECK(commit_annotation(bg, pool, ledger, ds, opts) == CommitStatus::kApplied);
  auto match = exhaustive_results(std::vector<ImageId>{1}, pool, ds)[0];
  CHECK(commit_annotation(match, pool, ledger, ds, opts) == CommitStatus::kBudgetExhausted);
  CHECK(commit_annotation(bg, pool, ledger, ds, opts) == CommitStatus::kApplied);
  CHECK(budget_exhausted(ledger, opts));
}

TEST_CASE("ten cycle run keeps the ledger consistent") {
  RunConfig cfg;
  cfg.synth.n_images = 300;
  cfg.test_images = 40;
  cfg.init_budget = 120;
  cfg.per_cycle_budget = 60;
  cfg.n_cycles = 10;
  Experiment exp(cfg, 5);
  std::size_t before = exp.state().ledger.cumulative_boxes;
  std::set<std::pair<ImageId, std::size_t>> seen;
  for (int c = 0; c < 10; ++c) {
    const auto& rep = exp.run_cycle();
    const auto& st = exp.state();
    check_partition(st.pool, exp.dataset());
    CHECK(rep.cycle_boxes <= cfg.per_cycle_budget);
    CHECK(rep.cycle_boxes == cfg.per_cycle_budget);
    CHECK(st.ledger.cumulative_boxes == before + rep.cycle_boxes);
    CHECK(recount(st.pool, exp.dataset()) == st.ledger.cumulative_boxes);
    CHECK(count_revealed(st.pool, exp.dataset()) == st.ledger.cumulative_boxes);
    // Revealed sets only grow.
    std::set<std::pair<ImageId, std::size_t>> now;
    for (const auto& img : exp.dataset().images()) {
      for (auto b : revealed_boxes(st.pool, img)) now.insert({img.id, b});
    }
    CHECK(std::includes(now.begin(), now.end(), seen.begin(), seen.end()));
    seen = now;
    before = st.ledger.cumulative_boxes;
  }
  CHECK(exp.state().ledger.cumulative_boxes == 120 + exp.state().ledger.init_overshoot + 600);
  CHECK(exp.finished());
}

TEST_CASE("zero budget cycle") {
  RunConfig cfg;
  cfg.synth.n_images = 60;
  cfg.test_images = 20;
  cfg.init_budget = 50;
  cfg.per_cycle_budget = 0;
  cfg.n_cycles = 1;
  cfg.strategy = Strategy::kRandom;
  cfg.protocol = Protocol::kBox;
  Experiment exp(cfg, 2);
  const auto pool = exp.state().pool;
  const auto rep = exp.run_cycle();
  CHECK(rep.cycle_boxes == 0);
  CHECK(exp.state().pool.fully_labeled == pool.fully_labeled);
  CHECK(exp.state().pool.sparse == pool.sparse);
  CHECK(exp.state().reports.size() == 1);
}
