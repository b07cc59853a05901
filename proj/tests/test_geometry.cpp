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
#include <random>

#include "doctest.h"

#include "boxald/geometry.hpp"
#include "oracles.hpp"

using namespace boxald;

TEST_CASE("iou hand cases") {
  const BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {100, 100, 110, 110}) == 0.0);
  CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou(a, {10, 0, 20, 10}) == 0.0);  // shared edge
  CHECK(iou({0, 0, 4, 4}, {1, 1, 3, 3}) == 0.25);
  CHECK(oracle::raster_iou(a, {5, 0, 15, 10}, 1.0) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou is symmetric and scale invariant") {
  std::mt19937_64 g(7);
  for (int t = 0; t < 500; ++t) {
    const BBox a = oracle::random_box(g, 100, 1, 60);
    const BBox b = oracle::random_box(g, 100, 1, 60);
    CHECK(iou(a, b) == iou(b, a));
    const BBox as{a.x1 * 3.7, a.y1 * 3.7, a.x2 * 3.7, a.y2 * 3.7};
    const BBox bs{b.x1 * 3.7, b.y1 * 3.7, b.x2 * 3.7, b.y2 * 3.7};
    CHECK(std::abs(iou(as, bs) - iou(a, b)) <= 1e-9);
  }
}

TEST_CASE("nms small cases") {
  CHECK(nms(std::vector<LabeledBox>{}, 0.5, false).empty());
  std::vector<LabeledBox> one(1);
  one[0].box = {0, 0, 1, 1};
  CHECK(nms(one, 0.5, false) == std::vector<std::size_t>{0});

  std::vector<LabeledBox> two(2);
  two[0].box = two[1].box = {0, 0, 10, 10};
  two[0].confidence = 0.8;
  two[1].confidence = 0.9;
  CHECK(nms(two, 0.5, false) == std::vector<std::size_t>{1});

  // Class-aware suppression never crosses classes.
  two[1].class_id = 1;
  CHECK(nms(two, 0.5, true) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("nms matches pick-and-remove reference and is idempotent") {
  std::mt19937_64 g(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<LabeledBox> d;
    for (int k = 0; k < 50; ++k) {
      auto b = oracle::random_detection(g, 120, 3);
      b.confidence = std::round(b.confidence * 10) / 10;  // force ties
      d.push_back(b);
    }
    const bool aware = t % 2 == 0;
    const auto kept = nms(d, 0.5, aware);
    REQUIRE(kept == oracle::brute_nms(d, 0.5, aware));
    std::vector<LabeledBox> survivors;
    for (auto k : kept) survivors.push_back(d[k]);
    const auto again = nms(survivors, 0.5, aware);
    CHECK(again.size() == survivors.size());
  }
}

TEST_CASE("views") {
  const BBox b{10, 0, 20, 10};
  CHECK(apply_view(AffineView::identity(100), b) == b);
  const AffineView flip{true, 1.0, 0.0, 0.0, 100.0};
  CHECK(apply_view(flip, b) == BBox{80, 0, 90, 10});

  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 1000; ++t) {
    const AffineView v{u(g) < 0.5, 0.5 + u(g), (u(g) - 0.5) * 40, (u(g) - 0.5) * 40, 200.0};
    const BBox x = oracle::random_box(g, 200, 1, 80);
    const BBox y = apply_view(v, x);
    CHECK(y.valid());
    const BBox back = invert_view(v, y);
    CHECK(std::abs(back.x1 - x.x1) <= 1e-9);
    CHECK(std::abs(back.y1 - x.y1) <= 1e-9);
    CHECK(std::abs(back.x2 - x.x2) <= 1e-9);
    CHECK(std::abs(back.y2 - x.y2) <= 1e-9);
  }
}

TEST_CASE("max_iou_assign hand cases") {
  const std::vector<BBox> refs{{0, 0, 10, 10}};
  auto a = max_iou_assign(refs, refs, 0.5);
  CHECK(a.per_reference[0] == std::vector<std::size_t>{0});

  // Member at x in [0,10]; references shifted so IoUs are 0.6 and 0.7.
  // IoU of [0,10] and [s,s+10] is (10-s)/(10+s): s = 2.5 -> 0.6, s = 30/17 -> 0.7.
  const std::vector<BBox> two{{2.5, 0, 12.5, 10}, {-30.0 / 17.0, 0, 10 - 30.0 / 17.0, 10}};
  const std::vector<BBox> member{{0, 0, 10, 10}};
  CHECK(iou(two[0], member[0]) == doctest::Approx(0.6));
  CHECK(iou(two[1], member[0]) == doctest::Approx(0.7));
  a = max_iou_assign(two, member, 0.5);
  CHECK(a.per_reference[0].empty());
  CHECK(a.per_reference[1] == std::vector<std::size_t>{0});

  // Tie goes to the lower reference index.
  const std::vector<BBox> tied{{0, 0, 10, 10}, {0, 0, 10, 10}};
  a = max_iou_assign(tied, member, 0.5);
  CHECK(a.per_reference[0].size() == 1);
  CHECK(a.per_reference[1].empty());

  a = max_iou_assign(std::vector<BBox>{}, member, 0.5);
  CHECK(!a.member_to_reference[0].has_value());
}

TEST_CASE("max_iou_assign matches the exhaustive argmax and partitions members") {
  std::mt19937_64 g(13);
  for (int t = 0; t < 50; ++t) {
    std::vector<BBox> refs, members;
    for (int i = 0; i < 20; ++i) refs.push_back(oracle::random_box(g, 200, 10, 60));
    for (int j = 0; j < 200; ++j) members.push_back(oracle::random_box(g, 200, 10, 60));
    const auto a = max_iou_assign(refs, members, 0.3);
    REQUIRE(a.per_reference == oracle::brute_assign(refs, members, 0.3));
    std::vector<int> seen(members.size(), 0);
    for (const auto& list : a.per_reference) {
      for (auto j : list) ++seen[j];
    }
    for (int s : seen) CHECK(s <= 1);
  }
}

TEST_CASE("class-aware assignment ignores other classes") {
  std::vector<LabeledBox> refs(2), members(1);
  refs[0].box = {0, 0, 10, 10};
  refs[0].class_id = 0;
  refs[1].box = {1, 0, 11, 10};
  refs[1].class_id = 1;
  members[0].box = {0, 0, 10, 10};
  members[0].class_id = 1;
  CHECK(max_iou_assign(refs, members, 0.5, false).per_reference[0].size() == 1);
  CHECK(max_iou_assign(refs, members, 0.5, true).per_reference[1].size() == 1);
}

TEST_CASE("members-to-members cost counts all cross pairs") {
  std::mt19937_64 g(17);
  std::vector<std::vector<BBox>> sets(4);
  std::size_t total = 0;
  for (std::size_t m = 0; m < sets.size(); ++m) {
    for (std::size_t k = 0; k < 3 + m; ++k) sets[m].push_back(oracle::random_box(g, 100, 5, 30));
    total += sets[m].size();
  }
  const auto r = members_to_members_assign(sets, 0.5);
  std::size_t expected = 0;
  for (const auto& s : sets) expected += s.size() * (total - s.size());
  CHECK(r.iou_evaluations == expected);
}

TEST_CASE("valid_labeled_box") {
  LabeledBox b = LabeledBox::from_distribution({0, 0, 1, 1}, {0.2, 0.8});
  CHECK(b.class_id == 1);
  CHECK(b.confidence == 0.8);
  CHECK(valid_labeled_box(b, 2));
  CHECK_FALSE(valid_labeled_box(b, 3));
  b.score_dist = {0.5, 0.6};
  CHECK_FALSE(valid_labeled_box(b, 2));
  b.score_dist.clear();
  b.box = {1, 1, 1, 2};
  CHECK_FALSE(valid_labeled_box(b, 2));
}
