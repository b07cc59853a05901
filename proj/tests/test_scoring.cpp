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
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"

#include "boxald/errors.hpp"
#include "boxald/pools.hpp"
#include "boxald/scoring.hpp"
#include "oracles.hpp"

using namespace boxald;

namespace {

LabeledBox with_dist(const BBox& b, std::vector<double> d) { return LabeledBox::from_distribution(b, std::move(d)); }

const Refiner kIdentity = [](const BBox& b) { return b; };

// Ignores the seed; emits a fixed scene seen through the view.
class FixedDetector : public Detector {
 public:
  explicit FixedDetector(std::vector<LabeledBox> scene) : scene_(std::move(scene)) {}
  std::vector<LabeledBox> predict(const ImageRecord&, const AffineView& view, std::uint64_t) const override {
    auto out = scene_;
    for (auto& b : out) b.box = apply_view(view, b.box);
    return out;
  }
  BBox refine(const BBox& b, const ImageRecord&) const override { return b; }

 private:
  std::vector<LabeledBox> scene_;
};

CommitteeOutput random_committee(std::mt19937_64& g, std::size_t members) {
  CommitteeOutput c;
  for (int i = 0; i < 6; ++i) c.references.push_back(oracle::random_detection(g, 200, 4));
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t m = 0; m < members; ++m) {
    AffineView v{u(g) < 0.5, 0.8 + 0.4 * u(g), (u(g) - 0.5) * 20, (u(g) - 0.5) * 20, 200.0};
    std::vector<LabeledBox> set;
    for (const auto& r : c.references) {
      if (u(g) < 0.2) continue;
      BBox b = r.box;
      const double s = 0.08 * b.width();
      b = {b.x1 + s * (u(g) - 0.5), b.y1 + s * (u(g) - 0.5), b.x2 + s * (u(g) - 0.5), b.y2 + s * (u(g) - 0.5)};
      set.push_back(with_dist(apply_view(v, b), oracle::random_distribution(g, 4)));
    }
    c.views.push_back(v);
    c.member_sets.push_back(set);
  }
  return c;
}

}  // namespace

TEST_CASE("classification disagreement hand cases") {
  CommitteeOutput c;
  c.references = {with_dist({0, 0, 10, 10}, {1.0, 0.0})};
  c.views = {AffineView::identity(100)};
  c.member_sets = {{with_dist({0, 0, 10, 10}, {0.5, 0.5})}};
  auto a = assign_committee(c, 0.5);
  CHECK(classification_disagreement(c, a)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  c.member_sets = {{with_dist({0, 0, 10, 10}, {1.0, 0.0})}};
  a = assign_committee(c, 0.5);
  CHECK(classification_disagreement(c, a)[0] == 0.0);

  // Two members: matches with d = {0.2, 0.4} and {0.6}.
  auto q = [](double d) { return std::vector<double>{std::exp(-d), 1 - std::exp(-d)}; };
  c.views = {AffineView::identity(100), AffineView::identity(100)};
  c.member_sets = {{with_dist({0, 0, 10, 10}, q(0.2)), with_dist({0, 0, 10, 10.5}, q(0.4))},
                   {with_dist({0, 0, 10, 10}, q(0.6))}};
  a = assign_committee(c, 0.5);
  CHECK(std::abs(classification_disagreement(c, a)[0] - 0.45) <= 1e-9);

  // A zero probability is clamped.
  c.views = {AffineView::identity(100)};
  c.member_sets = {{with_dist({0, 0, 10, 10}, {0.0, 1.0})}};
  a = assign_committee(c, 0.5);
  CHECK(classification_disagreement(c, a)[0] == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("localization disagreement hand cases") {
  const BBox ref{0, 0, 10, 10};
  const std::vector<BBox> same{ref, ref, ref};
  CHECK(coordinate_deviation(same, ref) == 0.0);
  const std::vector<BBox> xs{{0, 0, 10, 10}, {1, 0, 10, 10}, {2, 0, 10, 10}};
  CHECK(std::abs(coordinate_deviation(xs, ref) - std::sqrt(2.0 / 3.0) / 10.0 / 4.0) <= 1e-12);
  CHECK(coordinate_deviation(std::vector<BBox>{ref}, ref) == 0.0);

  // Same numbers through the committee path, one member per box.
  CommitteeOutput c;
  c.references = {with_dist(ref, {1.0})};
  for (const auto& b : xs) {
    c.views.push_back(AffineView::identity(100));
    c.member_sets.push_back({with_dist(b, {1.0})});
  }
  const auto a = assign_committee(c, 0.5);
  CHECK(std::abs(localization_disagreement(c, a, kIdentity)[0] - 0.02041241452) <= 1e-9);
}

TEST_CASE("hybrid score") {
  CHECK(std::abs(hybrid_score(0.45, 0.02) - 0.009) <= 1e-15);
  CHECK(hybrid_score(3.0, 0.0) == 0.0);
  CHECK(hybrid_score(0.0, 3.0) == 0.0);
}

TEST_CASE("committee scores are invariant to member order") {
  std::mt19937_64 g(23);
  for (int t = 0; t < 100; ++t) {
    CommitteeOutput c = random_committee(g, 8);
    const auto base = score_committee(c, 0.5, false, kIdentity, 7.0);
    std::vector<std::size_t> perm(c.member_sets.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    CommitteeOutput p = c;
    for (std::size_t m = 0; m < perm.size(); ++m) {
      p.member_sets[m] = c.member_sets[perm[m]];
      p.views[m] = c.views[perm[m]];
    }
    const auto permuted = score_committee(p, 0.5, false, kIdentity, 7.0);
    REQUIRE(permuted.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(permuted[i].d_cls == base[i].d_cls);
      CHECK(permuted[i].d_loc == base[i].d_loc);
      CHECK(permuted[i].d_hybrid == base[i].d_hybrid);
      CHECK(permuted[i].matched_members == base[i].matched_members);
    }
  }
}

TEST_CASE("d_loc is scale invariant and scores respect their bounds") {
  std::mt19937_64 g(29);
  for (int t = 0; t < 100; ++t) {
    const CommitteeOutput c = random_committee(g, 5);
    CommitteeOutput s = c;
    const double k = 3.0;
    auto scale = [k](BBox b) { return BBox{b.x1 * k, b.y1 * k, b.x2 * k, b.y2 * k}; };
    for (auto& r : s.references) r.box = scale(r.box);
    for (auto& set : s.member_sets) {
      for (auto& b : set) b.box = scale(b.box);
    }
    for (auto& v : s.views) {
      v.dx *= k;
      v.dy *= k;
      v.frame_width *= k;
    }
    const auto a = score_committee(c, 0.5, false, kIdentity);
    const auto b = score_committee(s, 0.5, false, kIdentity);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].matched_members == b[i].matched_members);
      CHECK(std::abs(a[i].d_loc - b[i].d_loc) <= 1e-9);
      CHECK(a[i].d_cls >= 0.0);
      CHECK(a[i].d_cls <= -std::log(kProbabilityFloor));
      CHECK(a[i].d_loc >= 0.0);
      if (!a[i].unmatched) CHECK(std::abs(a[i].d_hybrid - a[i].d_cls * a[i].d_loc) <= 1e-9);
    }
  }
}

TEST_CASE("zero disagreement fixed point") {
  std::mt19937_64 g(31);
  std::vector<LabeledBox> scene;
  for (int i = 0; i < 5; ++i) scene.push_back(oracle::random_detection(g, 300, 3));
  FixedDetector det(scene);
  CommitteeOptions opts;
  opts.views.flip_prob = 0.0;
  opts.views.scale_min = opts.views.scale_max = 1.0;
  opts.views.max_shift = 0.0;
  ImageRecord img;
  img.id = 4;
  img.width = img.height = 300;
  const auto s = score_image(img, det, det, opts, 99);
  REQUIRE(s.boxes.size() == scene.size());
  for (const auto& b : s.boxes) {
    CHECK(b.score.d_loc == 0.0);
    CHECK(b.score.d_hybrid == 0.0);
  }
}

TEST_CASE("flipped and scaled views still give exact agreement") {
  std::vector<LabeledBox> scene{with_dist({10, 20, 60, 90}, {0.9, 0.1}), with_dist({150, 40, 220, 100}, {0.2, 0.8})};
  FixedDetector det(scene);
  CommitteeOptions opts;  // random flips, scales and shifts
  ImageRecord img;
  img.id = 1;
  img.width = 320;
  img.height = 240;
  const auto s = score_image(img, det, det, opts, 5);
  for (const auto& b : s.boxes) {
    CHECK(b.score.matched_members == opts.members);
    CHECK(b.score.d_loc <= 1e-9);
  }
}

TEST_CASE("single member committee equals direct per-pair values") {
  const BBox ref{0, 0, 20, 10};
  const BBox mem{1, 1, 21, 11};
  CommitteeOutput c;
  c.references = {with_dist(ref, {0.7, 0.3})};
  c.views = {AffineView::identity(100)};
  c.member_sets = {{with_dist(mem, {0.6, 0.4})}};
  const auto s = score_committee(c, 0.5, false, kIdentity);
  CHECK(s[0].d_cls == doctest::Approx(-std::log(0.6)).epsilon(1e-12));
  CHECK(s[0].d_loc == 0.0);  // population std of one box
  CHECK(s[0].d_hybrid == 0.0);
}

TEST_CASE("unmatched references get the ceiling") {
  CommitteeOutput c;
  c.references = {with_dist({0, 0, 10, 10}, {0.5, 0.5}), with_dist({50, 50, 60, 60}, {1.0, 0.0})};
  c.views = {AffineView::identity(100), AffineView::identity(100)};
  c.member_sets = {{with_dist({0, 0, 10, 10}, {0.5, 0.5})}, {with_dist({1, 0, 11, 10}, {0.5, 0.5})}};
  auto s = score_committee(c, 0.5, false, kIdentity);
  CHECK(s[1].unmatched);
  CHECK(std::isnan(s[1].d_hybrid));
  s = score_committee(c, 0.5, false, kIdentity, 4.0);
  CHECK(s[1].d_hybrid == 4.0);

  std::vector<ImageScores> batch(2);
  batch[0].boxes = {{c.references[0], s[0]}, {c.references[1], s[1]}};
  BoxScore other;
  other.d_hybrid = 0.75;
  batch[1].boxes = {{c.references[0], other}};
  apply_ceiling(batch);
  CHECK(batch[0].boxes[1].score.d_hybrid == doctest::Approx(1.75));
  apply_ceiling(batch, 9.0);
  CHECK(batch[0].boxes[1].score.d_hybrid == 9.0);
}

TEST_CASE("chairman-reference assignment cost") {
  std::mt19937_64 g(37);
  CommitteeOutput c = random_committee(g, 6);
  // The chairman coincides with one member's predictions.
  c.member_sets[0].clear();
  for (const auto& r : c.references) c.member_sets[0].push_back(with_dist(apply_view(c.views[0], r.box), r.score_dist));
  std::size_t total = 0;
  std::vector<std::vector<BBox>> sets;
  for (std::size_t m = 0; m < c.member_sets.size(); ++m) {
    total += c.member_sets[m].size();
    std::vector<BBox> s;
    for (const auto& b : c.member_sets[m]) s.push_back(invert_view(c.views[m], b.box));
    sets.push_back(s);
  }
  CHECK(assign_committee(c, 0.5).iou_evaluations == c.references.size() * total);
  std::size_t cross = 0;
  for (const auto& s : sets) cross += s.size() * (total - s.size());
  CHECK(members_to_members_assign(sets, 0.5).iou_evaluations == cross);
  CHECK(cross > c.references.size() * total);
}

TEST_CASE("ranking is invariant under monotone transforms") {
  std::mt19937_64 g(41);
  std::vector<ImageScores> scores(10), warped;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i].image_id = static_cast<ImageId>(i);
    for (int k = 0; k < 5; ++k) {
      BoxScore s;
      s.d_hybrid = u(g) * 0.1;
      scores[i].boxes.push_back({oracle::random_detection(g, 300, 2), s});
    }
  }
  warped = scores;
  for (auto& img : warped) {
    for (auto& b : img.boxes) b.score.d_hybrid = std::exp(5 * b.score.d_hybrid) + 2;
  }
  std::vector<ImageRecord> images;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    ImageRecord r;
    r.id = static_cast<ImageId>(i);
    r.width = r.height = 300;
    images.push_back(r);
  }
  const DatasetIndex ds(images, {{0, "a", 1}, {1, "b", 2}});
  PoolState pool;
  for (const auto& r : images) pool.unlabeled.insert(r.id);
  ProposalOptions opts;
  opts.per_cycle_budget = 20;
  const auto a = propose_queries(scores, pool, ds, opts);
  const auto b = propose_queries(warped, pool, ds, opts);
  REQUIRE(a.queries.size() == b.queries.size());
  for (std::size_t q = 0; q < a.queries.size(); ++q) {
    CHECK(a.queries[q].image_id == b.queries[q].image_id);
    CHECK(a.queries[q].box == b.queries[q].box);
  }
}

TEST_CASE("mean entropy and box count baselines") {
  auto p = [](double v) { return with_dist({0, 0, 1, 1}, {v, 1 - v}); };
  CHECK(mean_entropy_score(std::vector<LabeledBox>{}) == 0.0);
  CHECK(mean_entropy_score(std::vector<LabeledBox>{p(0.5)}) == doctest::Approx(std::log(2.0)));
  CHECK(mean_entropy_score(std::vector<LabeledBox>{p(1.0)}) == 0.0);
  CHECK(mean_entropy_score(std::vector<LabeledBox>{p(0.5), p(1.0)}) == doctest::Approx(std::log(2.0) / 2));
  CHECK(binary_entropy(0.0) == 0.0);

  CHECK(box_count_score(std::vector<LabeledBox>{}) == 0);
  std::mt19937_64 g(43);
  std::vector<LabeledBox> d;
  for (int i = 0; i < 30; ++i) d.push_back(with_dist(oracle::random_box(g, 100, 10, 40), {0.9, 0.1}));
  std::vector<LabeledBox> kept;
  for (auto k : nms(d, 0.5, false)) kept.push_back(d[k]);
  CHECK(box_count_score(kept) == kept.size());
  kept[0].confidence = 0.1;
  CHECK(box_count_score(kept) == kept.size() - 1);
}

TEST_CASE("k-center greedy") {
  auto f = [](double x) { return ImageFeature{{x}}; };
  const std::vector<ImageFeature> pts{f(0), f(1), f(10)};
  const std::vector<std::size_t> sel{0};
  CHECK(k_center_greedy(pts, sel, 1) == std::vector<std::size_t>{2});
  CHECK(k_center_greedy(pts, sel, 2) == std::vector<std::size_t>{2, 1});
  const std::vector<ImageFeature> dup{f(0), f(0), f(5), f(3)};
  CHECK(k_center_greedy(dup, sel, 3).back() == 1);
  CHECK_THROWS_AS(k_center_greedy(pts, std::vector<std::size_t>{}, 1), ConfigError);
  CHECK_THROWS_AS(k_center_greedy(pts, sel, 3), ConfigError);
}

TEST_CASE("random score is reproducible and roughly uniform") {
  CHECK(random_score(5, 17) == random_score(5, 17));
  CHECK(random_score(5, 17) != random_score(6, 17));
  std::vector<int> bins(10, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double v = random_score(5, i);
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    ++bins[static_cast<int>(v * 10)];
  }
  double chi2 = 0.0;
  for (int b : bins) chi2 += (b - n / 10.0) * (b - n / 10.0) / (n / 10.0);
  CHECK(chi2 < 27.88);  // chi-square, 9 dof, p = 0.001
}

TEST_CASE("box score export") {
  std::vector<ImageScores> s(1);
  s[0].image_id = 3;
  BoxScore b;
  b.d_cls = 0.5;
  b.d_loc = 0.25;
  b.d_hybrid = 0.125;
  s[0].boxes.push_back({with_dist({1, 2, 3, 4}, {0.2, 0.8}), b});
  std::ostringstream out;
  write_box_scores(out, s);
  CHECK(out.str() == "image_id\tx1\ty1\tx2\ty2\tclass_id\td_cls\td_loc\td_hybrid\n3\t1\t2\t3\t4\t1\t0.5\t0.25\t0.125\n");
}
