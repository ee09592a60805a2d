// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "lmot/common.hpp"
#include "lmot/match/hungarian.hpp"
#include "lmot/match/losses.hpp"
#include "oracles.hpp"

using namespace lmot;
using namespace lmot::match;

namespace {

BBox3D box_at(double x, double y = 0, double z = 0, double w = 1, double l = 1, double h = 1,
              double yaw = 0) {
  BBox3D b;
  b.center = {x, y, z};
  b.size = {w, l, h};
  b.yaw = yaw;
  return b;
}

}  // namespace

TEST_SUITE_BEGIN("match");

TEST_CASE("focal_loss closed-form values") {
  // p=0.5, positive, alpha 0.25, gamma 2 -> 0.25 * 0.25 * ln 2
  CHECK(focal_loss(0.5, true, 0.25, 2.0) == doctest::Approx(0.25 * 0.25 * std::log(2.0)));
  // gamma 0 degenerates to weighted cross-entropy
  CHECK(focal_loss(0.5, true, 0.5, 0.0) == doctest::Approx(0.5 * std::log(2.0)));
  // confident correct prediction is ~0
  CHECK(focal_loss(0.999999, true, 0.25, 2.0) < 1e-5);
  CHECK(focal_loss(1.0, true, 0.25, 2.0) < 1e-5);  // clamped, not exactly 0
  CHECK(focal_loss(0.0, false, 0.25, 2.0) < 1e-5);
  // negative branch closed form
  CHECK(focal_loss(0.5, false, 0.25, 2.0) == doctest::Approx(0.75 * 0.25 * std::log(2.0)));
  CHECK_THROWS_AS(focal_loss(1.5, true, 0.25, 2.0), ValidationError);
  CHECK_THROWS_AS(focal_loss(-0.1, false, 0.25, 2.0), ValidationError);
}

TEST_CASE("focal_loss monotonicity") {
  double prev_pos = focal_loss(0.01, true, 0.25, 2.0);
  double prev_neg = focal_loss(0.01, false, 0.25, 2.0);
  for (double p = 0.02; p < 1.0; p += 0.01) {
    double fp = focal_loss(p, true, 0.25, 2.0);
    double fn = focal_loss(p, false, 0.25, 2.0);
    CHECK(fp < prev_pos);  // decreasing in p on positives
    CHECK(fn > prev_neg);  // increasing in p on negatives
    prev_pos = fp;
    prev_neg = fn;
  }
}

TEST_CASE("l1_box_loss hand cases") {
  auto a = box_at(0, 0, 0, 2, 4, 1.5, 0.2);
  CHECK(l1_box_loss(a, a) == doctest::Approx(0.0));
  auto b = a;
  b.center[0] += 0.7;
  CHECK(l1_box_loss(b, a) == doctest::Approx(0.1));
  // yaw wrap: pred 3, gt -3 -> |2pi - 6| / 7
  auto p = box_at(0, 0, 0, 1, 1, 1, 3.0);
  auto g = box_at(0, 0, 0, 1, 1, 1, -3.0);
  CHECK(l1_box_loss(p, g) == doctest::Approx((2.0 * M_PI - 6.0) / 7.0));
}

TEST_CASE("giou_loss hand cases") {
  auto a = box_at(0, 0, 0);
  CHECK(giou_loss(a, a) == doctest::Approx(0.0));
  CHECK(giou_loss(box_at(2, 0, 0), a) == doctest::Approx(4.0 / 3.0));  // giou -1/3
  CHECK(giou_loss(box_at(1, 0, 0), a) == doctest::Approx(1.0));       // touching
}

TEST_CASE("match_cost_matrix values") {
  auto w = MatchWeights::tracker_defaults();
  std::vector<MatchCandidate> preds(1);
  preds[0].box = box_at(0, 0, 0);
  preds[0].score = 0.5;
  preds[0].class_id = 2;

  std::vector<GroundTruthObject> gts(1);
  gts[0].box = box_at(0, 0, 0);
  gts[0].class_id = 2;
  gts[0].instance_id = 9;

  auto cost = match_cost_matrix(preds, gts, w, 7);
  // perfect box: only the class focal term remains (p = 0.5)
  CHECK(cost(0, 0) == doctest::Approx(2.0 * focal_loss(0.5, true, 0.25, 2.0)));

  // null gt column: negative focal on the raw score
  std::vector<GroundTruthObject> null_gt{GroundTruthObject::null_object()};
  auto nc = match_cost_matrix(preds, null_gt, w, 7);
  CHECK(nc(0, 0) == doctest::Approx(2.0 * 0.75 * 0.25 * std::log(2.0)));

  // near-perfect prediction has ~0 cost against its gt
  preds[0].score = 1.0;
  auto pc = match_cost_matrix(preds, gts, MatchWeights::smoother_defaults(), 7);
  CHECK(pc(0, 0) < 1e-5);

  // wrong class dominates the cost
  preds[0].class_id = 3;
  auto wc = match_cost_matrix(preds, gts, w, 7);
  CHECK(wc(0, 0) > 5.0);

  // distribution-based candidate
  preds[0].class_id = -1;
  preds[0].class_probs = {0, 0, 0.8, 0.2, 0, 0, 0};
  preds[0].score = 0.9;
  auto dc = match_cost_matrix(preds, gts, w, 7);
  CHECK(dc(0, 0) == doctest::Approx(0.25 * l1_box_loss(preds[0].box, gts[0].box) +
                                    2.0 * focal_loss(0.9 * 0.8, true, 0.25, 2.0) +
                                    giou_loss(preds[0].box, gts[0].box)));

  CHECK_THROWS_AS(match_cost_matrix({}, gts, w, 7), ValidationError);
  preds[0].class_probs = {0.5, 0.5};
  CHECK_THROWS_AS(match_cost_matrix(preds, gts, w, 7), ValidationError);
}

TEST_CASE("pad_ground_truth") {
  std::vector<GroundTruthObject> gts(2);
  gts[0].instance_id = 1;
  gts[1].instance_id = 2;
  auto p = pad_ground_truth(gts, 5);
  REQUIRE(p.size() == 5);
  CHECK_FALSE(p[0].is_null);
  CHECK_FALSE(p[1].is_null);
  CHECK(p[2].is_null);
  CHECK(p[4].is_null);
  CHECK(pad_ground_truth(gts, 2).size() == 2);
  CHECK(pad_ground_truth({}, 4).size() == 4);
  CHECK_THROWS_AS(pad_ground_truth(gts, 1), ValidationError);
}

TEST_CASE("hungarian basic cases") {
  Eigen::MatrixXd c(1, 1);
  c << 3.5;
  auto a = hungarian_assign(c);
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.pairs[0] == std::pair<int, int>{0, 0});
  CHECK(a.total_cost == doctest::Approx(3.5));

  Eigen::MatrixXd c2(2, 2);
  c2 << 1, 2, 3, 1;
  auto a2 = hungarian_assign(c2);
  CHECK(a2.total_cost == doctest::Approx(2.0));
  CHECK(a2.col_of(0) == 0);
  CHECK(a2.col_of(1) == 1);

  CHECK(hungarian_assign(Eigen::MatrixXd(0, 0)).pairs.empty());
  CHECK(hungarian_assign(Eigen::MatrixXd(0, 3)).pairs.empty());

  Eigen::MatrixXd bad(1, 2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian_assign(bad), ValidationError);
}

TEST_CASE("hungarian lexicographic tie-break") {
  // all-equal costs: identity assignment is the lexicographically smallest
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
  auto a = hungarian_assign(ones);
  for (int i = 0; i < 4; ++i) CHECK(a.col_of(i) == i);

  // two optimal assignments; (0,0),(1,1) beats (0,1),(1,0)
  Eigen::MatrixXd t(2, 2);
  t << 1, 1, 1, 1;
  auto at = hungarian_assign(t);
  CHECK(at.col_of(0) == 0);

  // rectangular wide: 1 row, 3 equal cols -> col 0
  Eigen::MatrixXd wide(1, 3);
  wide << 2, 2, 2;
  CHECK(hungarian_assign(wide).col_of(0) == 0);

  // rectangular tall: 3 rows, 1 col, equal -> row 0 matched
  Eigen::MatrixXd tall(3, 1);
  tall << 2, 2, 2;
  auto atall = hungarian_assign(tall);
  REQUIRE(atall.pairs.size() == 1);
  CHECK(atall.pairs[0] == std::pair<int, int>{0, 0});
}

TEST_CASE("hungarian equals brute force on random matrices") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(0.0, 100.0);
  std::uniform_int_distribution<int> ui(0, 4);  // small ints force exact ties

  for (int trial = 0; trial < 400; ++trial) {
    std::uniform_int_distribution<int> dim(1, 6);
    int r = dim(rng), c = dim(rng);
    Eigen::MatrixXd m(r, c);
    bool ints = trial % 2 == 0;
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = ints ? static_cast<double>(ui(rng)) : ur(rng);

    auto fast = hungarian_assign(m);
    auto ref = test_oracle::brute_force_assign(m);
    REQUIRE(fast.pairs.size() == ref.pairs.size());
    CHECK(fast.pairs == ref.pairs);
    CHECK(fast.total_cost == ref.total_cost);  // identical pairs -> identical sum
  }
}

TEST_CASE("hungarian shift invariance") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ur(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd m(4, 5);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) m(i, j) = ur(rng);
    auto base = hungarian_assign(m);
    auto shifted = hungarian_assign(m.array() + 17.25);
    CHECK(base.pairs == shifted.pairs);
  }
}

TEST_SUITE_END();
