// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "lmot/common.hpp"
#include "lmot/match/hungarian.hpp"
#include "lmot/metrics/metrics.hpp"

using namespace lmot;
using namespace lmot::metrics;

namespace {

EvalBox pred(double x, double y, std::int64_t id, double score = 1.0, int cls = 0) {
  EvalBox b;
  b.box.center = {x, y, 0.0};
  b.box.size = {2, 4, 1.5};
  b.id = id;
  b.score = score;
  b.class_id = cls;
  return b;
}

GroundTruthObject gt(double x, double y, std::int64_t inst, int cls = 0) {
  GroundTruthObject g;
  g.box.center = {x, y, 0.0};
  g.box.size = {2, 4, 1.5};
  g.class_id = cls;
  g.instance_id = inst;
  return g;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("match_frame gating, persistence, and identity") {
  EvalConfig cfg;
  std::map<std::int64_t, std::int64_t> id_map;

  // identical sets: all TP
  auto r1 = match_frame({pred(0, 0, 1), pred(10, 0, 2)}, {gt(0, 0, 7), gt(10, 0, 8)}, cfg, id_map);
  CHECK(r1.tp.size() == 2);
  CHECK(r1.fp.empty());
  CHECK(r1.fn.empty());
  CHECK(id_map.at(7) == 1);
  CHECK(id_map.at(8) == 2);

  // one pred 5 m from the only gt with a 2 m gate: 1 FP + 1 FN
  std::map<std::int64_t, std::int64_t> m2;
  auto r2 = match_frame({pred(5, 0, 1)}, {gt(0, 0, 7)}, cfg, m2);
  CHECK(r2.tp.empty());
  CHECK(r2.fp == std::vector<int>{0});
  CHECK(r2.fn == std::vector<int>{0});

  // persistence bonus: equidistant preds, the previously bound id wins
  std::map<std::int64_t, std::int64_t> m3{{7, 42}};
  auto r3 = match_frame({pred(0, 1, 1), pred(0, -1, 42)}, {gt(0, 0, 7)}, cfg, m3);
  REQUIRE(r3.tp.size() == 1);
  CHECK(std::get<0>(r3.tp[0]) == 1);  // pred with id 42
  CHECK(r3.fp == std::vector<int>{0});

  // null gt rejected
  GroundTruthObject null_gt = GroundTruthObject::null_object();
  std::map<std::int64_t, std::int64_t> m4;
  CHECK_THROWS_AS(match_frame({}, {null_gt}, cfg, m4), ValidationError);
}

TEST_CASE("persistence bonus distorts total distance by at most eps per pair") {
  EvalConfig cfg;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int it = 0; it < 300; ++it) {
    std::vector<EvalBox> preds;
    std::vector<GroundTruthObject> gts;
    const int np = 1 + static_cast<int>(rng() % 5), ng = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < np; ++i) preds.push_back(pred(u(rng), u(rng), i));
    for (int j = 0; j < ng; ++j) gts.push_back(gt(u(rng), u(rng), j));

    std::map<std::int64_t, std::int64_t> id_map;
    for (int j = 0; j < ng; ++j) id_map[j] = static_cast<std::int64_t>(rng() % np);

    auto res = match_frame(preds, gts, cfg, id_map);
    double with_bonus = 0.0;
    for (const auto& [p, g, d] : res.tp) with_bonus += d;

    // pure Hungarian reference on the gated distance matrix
    Eigen::MatrixXd cost(np, ng);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < ng; ++j) {
        const double d = std::hypot(preds[i].box.center[0] - gts[j].box.center[0],
                                    preds[i].box.center[1] - gts[j].box.center[1]);
        cost(i, j) = d <= cfg.match_distance ? d : 1e6;
      }
    double pure = 0.0;
    std::size_t pure_pairs = 0;
    for (const auto& [r, c] : match::hungarian_assign(cost).pairs)
      if (cost(r, c) < 1e6) {
        pure += cost(r, c);
        ++pure_pairs;
      }
    CHECK(res.tp.size() == pure_pairs);  // the bonus never changes match cardinality
    CHECK(with_bonus <= pure + kPersistenceBonus * static_cast<double>(pure_pairs) + 1e-12);
  }
}

TEST_CASE("clearmot hand scenario: MOTA 0.7 from GT20 FP2 FN3 IDS1") {
  EvalConfig cfg;
  EvalAccumulator acc;
  for (int f = 0; f < 10; ++f) {
    std::vector<EvalBox> preds;
    std::vector<GroundTruthObject> gts{gt(0, 0, 1), gt(20, 0, 2)};
    // gt 1 tracked every frame; its id flips at frame 7 -> 1 IDS
    preds.push_back(pred(0, 0.2, f < 7 ? 100 : 101));
    // gt 2 missed on frames 2,3,4 -> 3 FN, one gap -> 1 FRAG
    if (f < 2 || f > 4) preds.push_back(pred(20, 0.2, 200));
    // far-away clutter on frames 5,6 -> 2 FP
    if (f == 5 || f == 6) preds.push_back(pred(40, 40, 300));
    acc.add_frame(preds, gts, cfg);
  }
  auto r = compute_clearmot(acc);
  CHECK(r.gt_total == 20);
  CHECK(r.tp == 17);
  CHECK(r.fp == 2);
  CHECK(r.fn == 3);
  CHECK(r.ids == 1);
  CHECK(r.frag == 1);
  REQUIRE(r.mota.has_value());
  CHECK(*r.mota == 0.7);  // 1 - (3+2+1)/20, exact in doubles
  REQUIRE(r.motp.has_value());
  CHECK(*r.motp == doctest::Approx(0.2));
  CHECK(r.mt == 1);  // gt 1: 10/10
  CHECK(r.pt == 1);  // gt 2: 7/10
  CHECK(r.ml == 0);
}

TEST_CASE("clearmot perfect tracking") {
  EvalConfig cfg;
  EvalAccumulator acc;
  for (int f = 0; f < 6; ++f)
    acc.add_frame({pred(0, 0, 1), pred(9, 0, 2)}, {gt(0, 0, 1), gt(9, 0, 2)}, cfg);
  auto r = compute_clearmot(acc);
  CHECK(*r.mota == 1.0);
  CHECK(r.ids == 0);
  CHECK(r.frag == 0);
  CHECK(r.mt == 2);
  CHECK(*r.motp == 0.0);
}

TEST_CASE("clearmot id swap counts two switches") {
  EvalConfig cfg;
  EvalAccumulator acc;
  for (int f = 0; f < 4; ++f) {
    const bool swapped = f >= 2;
    acc.add_frame({pred(0, 0, swapped ? 2 : 1), pred(9, 0, swapped ? 1 : 2)},
                  {gt(0, 0, 1), gt(9, 0, 2)}, cfg);
  }
  auto r = compute_clearmot(acc);
  CHECK(r.ids == 2);
  CHECK(r.tp == 8);
  CHECK(*r.mota == 1.0 - 2.0 / 8.0);
}

TEST_CASE("clearmot fragmentation from intermittent coverage") {
  EvalConfig cfg;
  EvalAccumulator acc;
  // covered on frames 0,1,3,5 of 6: two tracked->untracked->tracked gaps
  for (int f = 0; f < 6; ++f) {
    std::vector<EvalBox> preds;
    if (f == 0 || f == 1 || f == 3 || f == 5) preds.push_back(pred(0, 0, 1));
    acc.add_frame(preds, {gt(0, 0, 1)}, cfg);
  }
  auto r = compute_clearmot(acc);
  CHECK(r.frag == 2);
  CHECK(r.ids == 0);
  CHECK(r.mt == 0);
  CHECK(r.pt == 1);  // coverage 4/6
}

TEST_CASE("clearmot MT and ML boundaries are inclusive") {
  EvalConfig cfg;
  auto run = [&](int covered, int total) {
    EvalAccumulator acc;
    for (int f = 0; f < total; ++f) {
      std::vector<EvalBox> preds;
      if (f < covered) preds.push_back(pred(0, 0, 1));
      acc.add_frame(preds, {gt(0, 0, 1)}, cfg);
    }
    return compute_clearmot(acc);
  };
  CHECK(run(8, 10).mt == 1);   // exactly 0.8 -> MT
  CHECK(run(7, 10).pt == 1);   // 0.7 -> PT
  CHECK(run(2, 10).ml == 1);   // exactly 0.2 -> ML
  CHECK(run(3, 10).pt == 1);   // 0.3 -> PT
  CHECK(run(9, 10).mt == 1);
  CHECK(run(1, 10).ml == 1);
  CHECK(run(0, 10).ml == 1);

  // empty input: MOTA null
  auto none = compute_clearmot(EvalAccumulator{});
  CHECK_FALSE(none.mota.has_value());
  CHECK_FALSE(none.motp.has_value());
}

TEST_CASE("amota hand-simulated sweep with an injected FP") {
  EvalConfig cfg;
  cfg.recall_steps = 4;  // targets 0.25 0.5 0.75 1.0

  EvalSequence seq;
  for (int f = 0; f < 5; ++f) {
    EvalFrame fr;
    fr.gts = {gt(0, 0, 1), gt(10, 0, 2)};
    fr.preds.push_back(pred(0.5, 0, 100, 0.9));
    fr.preds.push_back(pred(10.5, 0, 200, 0.6));
    if (f < 2) fr.preds.push_back(pred(50, 50, 300, 0.7));  // clutter
    seq.push_back(fr);
  }
  auto r = compute_amota_amotp({seq}, cfg);
  REQUIRE(r.amota.has_value());
  // targets 0.25/0.5 resolve to threshold 0.9: TP 5, FP 0 -> MOTAR 1;
  // targets 0.75/1.0 resolve to 0.6: TP 10, FP 2 -> MOTAR 0.8
  CHECK(*r.amota == doctest::Approx(0.9));
  CHECK(*r.amotp == doctest::Approx(0.5));
  REQUIRE(r.points.size() == 4);
  CHECK(r.points[0].threshold == 0.9);
  CHECK(r.points[0].motar == 1.0);
  CHECK(r.points[2].threshold == 0.6);
  CHECK(r.points[2].motar == doctest::Approx(0.8));
  CHECK(r.points[3].achieved == 1.0);

  // removing the clutter cannot lower aMOTA
  EvalSequence clean = seq;
  for (auto& fr : clean)
    fr.preds.erase(std::remove_if(fr.preds.begin(), fr.preds.end(),
                                  [](const EvalBox& b) { return b.id == 300; }),
                   fr.preds.end());
  auto r2 = compute_amota_amotp({clean}, cfg);
  CHECK(*r2.amota >= *r.amota);
  CHECK(*r2.amota == 1.0);
}

TEST_CASE("amota skips unreachable recall targets") {
  EvalConfig cfg;
  cfg.recall_steps = 4;
  EvalSequence seq;
  for (int f = 0; f < 4; ++f) {
    EvalFrame fr;
    fr.gts = {gt(0, 0, 1), gt(10, 0, 2)};
    fr.preds = {pred(0, 0, 100, 0.8)};  // only ever covers one object
    seq.push_back(fr);
  }
  auto r = compute_amota_amotp({seq}, cfg);
  REQUIRE(r.amota.has_value());
  CHECK(r.points.size() == 2);  // 0.25 and 0.5 reachable; 0.75 and 1.0 skipped
  CHECK(*r.amota == 1.0);
  CHECK(r.diagnostic.find("skipped") != std::string::npos);

  // no predictions at all: null result with diagnostic
  EvalSequence empty_preds;
  for (int f = 0; f < 2; ++f) {
    EvalFrame fr;
    fr.gts = {gt(0, 0, 1)};
    empty_preds.push_back(fr);
  }
  auto r3 = compute_amota_amotp({empty_preds}, cfg);
  CHECK_FALSE(r3.amota.has_value());
  CHECK_FALSE(r3.diagnostic.empty());
}

TEST_CASE("amota per-class averaging") {
  EvalConfig cfg;
  cfg.recall_steps = 2;
  cfg.per_class = true;
  EvalSequence seq;
  for (int f = 0; f < 3; ++f) {
    EvalFrame fr;
    fr.gts = {gt(0, 0, 1, 0), gt(10, 0, 2, 1)};
    fr.preds = {pred(0, 0, 100, 0.9, 0)};  // class 1 never predicted
    seq.push_back(fr);
  }
  auto r = compute_amota_amotp({seq}, cfg);
  REQUIRE(r.amota.has_value());
  CHECK(r.class_amota.at(0) == 1.0);
  CHECK(r.class_amota.at(1) == 0.0);
  CHECK(*r.amota == 0.5);
}

TEST_CASE("scores only gate the sweep, never clearmot counting") {
  EvalConfig cfg;
  auto build = [&](double scale) {
    EvalAccumulator acc;
    for (int f = 0; f < 5; ++f) {
      std::vector<EvalBox> preds{pred(0, 0, 1, 0.9 * scale), pred(9, 0, 2, 0.4 * scale)};
      if (f == 2) preds[1].id = 3;  // one IDS
      acc.add_frame(preds, {gt(0, 0, 1), gt(9, 0, 2)}, cfg);
    }
    return compute_clearmot(acc);
  };
  auto a = build(1.0), b = build(0.5);
  CHECK(a.ids == b.ids);
  CHECK(a.frag == b.frag);
  CHECK(a.ids == 2);  // 2->3 then 3->2
}

TEST_CASE("map center distance") {
  // detections equal to gts with score 1 -> mAP 1
  std::vector<EvalFrame> frames;
  for (int f = 0; f < 3; ++f) {
    EvalFrame fr;
    fr.gts = {gt(0, 0, 1, 0), gt(8, 0, 2, 1)};
    fr.preds = {pred(0, 0, -1, 1.0, 0), pred(8, 0, -1, 1.0, 1)};
    frames.push_back(fr);
  }
  auto perfect = compute_map_center_distance(frames);
  REQUIRE(perfect.map.has_value());
  CHECK(*perfect.map == 1.0);
  CHECK(perfect.entries.size() == 8);  // 2 classes x 4 thresholds

  // one gt, one detection at 3 m: only the 4 m threshold counts
  std::vector<EvalFrame> single(1);
  single[0].gts = {gt(0, 0, 1)};
  single[0].preds = {pred(3, 0, -1, 0.9)};
  auto part = compute_map_center_distance(single);
  CHECK(*part.map == 0.25);

  // duplicate detections on one gt: the second is a false positive
  std::vector<EvalFrame> dup(1);
  dup[0].gts = {gt(0, 0, 1)};
  dup[0].preds = {pred(40, 40, -1, 0.9), pred(0, 0, -1, 0.8)};
  auto r = compute_map_center_distance(dup, {2.0});
  // ranked: FP first, TP at rank 2 -> precision envelope 0.5
  CHECK(*r.map == 0.5);

  std::vector<EvalFrame> dup2(1);
  dup2[0].gts = {gt(0, 0, 1)};
  dup2[0].preds = {pred(0, 0, -1, 0.9), pred(0.1, 0, -1, 0.8)};
  auto r2 = compute_map_center_distance(dup2, {2.0});
  CHECK(*r2.map == 1.0);  // TP first, duplicate FP after the last TP

  // no ground truth: null
  std::vector<EvalFrame> none(1);
  none[0].preds = {pred(0, 0, -1, 0.9)};
  CHECK_FALSE(compute_map_center_distance(none).map.has_value());
}

TEST_SUITE_END();
