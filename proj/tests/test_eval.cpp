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
#include <sstream>

#include "doctest.h"

#include "boxald/eval.hpp"
#include "oracles.hpp"

using namespace boxald;

namespace {

LabeledBox det(BBox b, int cls, double conf) { return LabeledBox{b, cls, {}, conf}; }

std::vector<ImageDetections> one_image(std::vector<LabeledBox> boxes) { return {ImageDetections{1, std::move(boxes)}}; }

}  // namespace

TEST_CASE("pr curve hand cases") {
  const auto gt = one_image({det({0, 0, 10, 10}, 0, 1)});
  auto pts = pr_curve(one_image({det({0, 0, 10, 9}, 0, 0.9)}), gt, 0.5, 0);
  REQUIRE(pts);
  CHECK(*pts == std::vector<PrPoint>{{1, 1}});
  CHECK(average_precision(*pts, ApMode::kAllPoint) == 1.0);
  CHECK(average_precision(*pts, ApMode::k101Point) == 1.0);

  pts = pr_curve(one_image({det({50, 50, 60, 60}, 0, 0.9), det({0, 0, 10, 10}, 0, 0.5)}), gt, 0.5, 0);
  CHECK(*pts == std::vector<PrPoint>{{0, 0}, {0.5, 1}});
  CHECK(average_precision(*pts, ApMode::kAllPoint) == 0.5);

  // A duplicate on a matched target is a false positive.
  pts = pr_curve(one_image({det({0, 0, 10, 10}, 0, 0.9), det({0, 0, 10, 10}, 0, 0.8)}), gt, 0.5, 0);
  CHECK(*pts == std::vector<PrPoint>{{1, 1}, {0.5, 1}});

  CHECK_FALSE(pr_curve(gt, gt, 0.5, 1).has_value());
  CHECK(pr_curve(std::vector<ImageDetections>{}, gt, 0.5, 0)->empty());
}

TEST_CASE("envelope is non-increasing") {
  const std::vector<PrPoint> pts{{1, 0.1}, {0.5, 0.2}, {0.7, 0.5}, {0.4, 0.6}, {0.6, 0.9}};
  const auto env = precision_envelope(pts);
  CHECK(env == std::vector<double>{1, 0.7, 0.7, 0.6, 0.6});
}

TEST_CASE("map hand cases") {
  const auto gt = one_image({det({0, 0, 10, 10}, 0, 1), det({20, 0, 30, 10}, 0, 1), det({50, 50, 60, 60}, 1, 1)});
  auto r = map_scores(gt, gt, 2);
  CHECK(r.map50 == 1.0);
  CHECK(r.map5095 == 1.0);
  r = map_scores(std::vector<ImageDetections>{}, gt, 2);
  CHECK(r.map50 == 0.0);
  CHECK(r.map5095 == 0.0);

  // Class 0: exact hit, duplicate, exact hit. PR (1, .5) (.5, .5) (2/3, 1).
  // Class 1: false positive, then a hit at IoU 90/110.
  const auto pred = one_image({det({0, 0, 10, 10}, 0, 0.9), det({0, 0, 10, 10}, 0, 0.8), det({20, 0, 30, 10}, 0, 0.7),
                               det({80, 80, 90, 90}, 1, 0.95), det({51, 50, 61, 60}, 1, 0.6)});
  r = map_scores(pred, gt, 3);
  REQUIRE(r.classes.size() == 2);
  const double ap0_all = 0.5 + 0.5 * 2.0 / 3.0;
  CHECK(std::abs(r.classes[0].ap50 - ap0_all) <= 1e-12);
  CHECK(std::abs(r.classes[1].ap50 - 0.5) <= 1e-12);
  CHECK(std::abs(r.map50 - (ap0_all + 0.5) / 2) <= 1e-12);
  // 101-point: recall <= .5 gives precision 1 (51 samples), above gives 2/3.
  const double ap0_101 = (51.0 + 50.0 * 2.0 / 3.0) / 101.0;
  // Class 1 hits at thresholds .50 through .80 only.
  const double ap1 = 7 * 0.5 / 10;
  CHECK(std::abs(r.map5095 - (ap0_101 + ap1) / 2) <= 1e-12);
  CHECK(r.iou_thresholds.size() == 10);
}

TEST_CASE("AP agrees with dense integration") {
  std::mt19937_64 g(53);
  std::uniform_int_distribution<int> n_gt(20, 60);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    std::vector<ImageDetections> gt(4), pred(4);
    for (int i = 0; i < 4; ++i) {
      gt[i].image_id = pred[i].image_id = i;
      const int n = n_gt(g) / 4 + 1;
      for (int k = 0; k < n; ++k) {
        const BBox b{k * 50.0, i * 50.0, k * 50.0 + 30, i * 50.0 + 30};
        gt[i].boxes.push_back(det(b, 0, 1));
        if (u(g) < 0.8) pred[i].boxes.push_back(det({b.x1 + 2 * u(g), b.y1, b.x2, b.y2}, 0, u(g)));
        if (u(g) < 0.4) pred[i].boxes.push_back(det(oracle::random_box(g, 900, 5, 40), 0, u(g) * 0.8));
      }
    }
    const auto pts = pr_curve(pred, gt, 0.5, 0);
    REQUIRE(pts);
    const double dense = oracle::dense_ap(*pts, 10000);
    CHECK(std::abs(average_precision(*pts, ApMode::k101Point) - dense) <= 0.01);
    CHECK(std::abs(average_precision(*pts, ApMode::kAllPoint) - dense) <= 1e-3);
    const double ap = average_precision(*pts, ApMode::kAllPoint);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
  }
}

TEST_CASE("top-rank true positive does not decrease AP") {
  const auto gt = one_image({det({0, 0, 10, 10}, 0, 1), det({20, 0, 30, 10}, 0, 1), det({40, 0, 50, 10}, 0, 1)});
  const auto pred = one_image({det({70, 70, 80, 80}, 0, 0.9), det({0, 0, 10, 10}, 0, 0.5)});
  auto with_tp = pred;
  with_tp[0].boxes.push_back(det({20, 0, 30, 10}, 0, 0.99));
  const double before = average_precision(*pr_curve(pred, gt, 0.5, 0), ApMode::kAllPoint);
  const double after = average_precision(*pr_curve(with_tp, gt, 0.5, 0), ApMode::kAllPoint);
  CHECK(after >= before);
}

TEST_CASE("score distribution exports") {
  CHECK(five_number_summary({1, 2, 3, 4, 5}) == std::array<double, 5>{1, 2, 3, 4, 5});
  CHECK(five_number_summary({5, 4, 3, 2, 1}) == std::array<double, 5>{1, 2, 3, 4, 5});
  CHECK(five_number_summary({1, 2, 3, 4}) == std::array<double, 5>{1, 1, 2, 3, 4});

  std::ostringstream empty;
  export_score_distribution(empty, std::vector<ScoreSample>{});
  CHECK(empty.str() == "cycle\tsplit\tscore\n");

  const std::vector<ScoreSample> s{{1, "labeled", 0.5}, {1, "unlabeled", 0.25}, {1, "labeled", 1.5}};
  std::ostringstream out;
  export_score_distribution(out, s);
  CHECK(out.str() == "cycle\tsplit\tscore\n1\tlabeled\t0.5\n1\tunlabeled\t0.25\n1\tlabeled\t1.5\n");
  const auto sum = summarize_scores(s);
  REQUIRE(sum.size() == 2);
  CHECK(sum[0].split == "labeled");
  CHECK(sum[0].count == 2);
  CHECK(sum[0].quantiles[4] == 1.5);
  CHECK(sum[1].split == "unlabeled");
}
