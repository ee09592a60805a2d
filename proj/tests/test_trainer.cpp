// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "lmot/common.hpp"
#include "lmot/match/hungarian.hpp"
#include "lmot/nn/grad_check.hpp"
#include "lmot/train/trainer.hpp"

using namespace lmot;
using namespace lmot::train;

namespace {

GroundTruthObject make_gt(double x, double y, std::int64_t instance, int cls = 2,
                          double yaw = 0.0) {
  GroundTruthObject g;
  g.box.center = {x, y, 0.9};
  g.box.size = {1.9, 4.5, 1.7};
  g.box.yaw = yaw;
  g.class_id = cls;
  g.instance_id = instance;
  return g;
}

Detection make_det(double x, double y, double score = 0.9, int cls = 2, double yaw = 0.0) {
  Detection d;
  d.box.center = {x, y, 0.9};
  d.box.size = {1.9, 4.5, 1.7};
  d.box.yaw = yaw;
  d.class_id = cls;
  d.score = score;
  return d;
}

// Hand-built head outputs: m boxes with positive sizes, open-interval scores.
struct FakeHeads {
  nn::Tensor box7, probs, score;
};

FakeHeads fake_heads(const Eigen::MatrixXd& box, const Eigen::MatrixXd& probs,
                     const Eigen::MatrixXd& score, bool as_params = false) {
  FakeHeads h;
  if (as_params) {
    h.box7 = nn::Tensor::param(box, "fake.box");
    h.probs = nn::Tensor::param(probs, "fake.probs");
    h.score = nn::Tensor::param(score, "fake.score");
  } else {
    h.box7 = nn::Tensor::constant(box);
    h.probs = nn::Tensor::constant(probs);
    h.score = nn::Tensor::constant(score);
  }
  return h;
}

model::Smoother::Outputs as_outputs(const FakeHeads& h) {
  model::Smoother::Outputs out;
  out.box7 = h.box7;
  out.class_probs = h.probs;
  out.score = h.score;
  return out;
}

model::Tracker::Decoded as_decoded(const FakeHeads& h) {
  model::Tracker::Decoded d;
  d.box7 = h.box7;
  d.class_probs = h.probs;
  d.score = h.score;
  return d;
}

// A small scene: n_objects moving in +x, detections equal to ground truth.
FrameSequence scripted_sequence(int frames, int n_objects, double score = 0.9) {
  FrameSequence seq;
  seq.id = "scripted";
  for (int f = 0; f < frames; ++f) {
    Frame fr;
    fr.frame_idx = f;
    fr.timestamp_us = static_cast<std::int64_t>(f) * 500000;
    for (int o = 0; o < n_objects; ++o) {
      const double x = -10.0 + 2.0 * o + 1.0 * f;
      const double y = -5.0 + 6.0 * o;
      fr.ground_truth.push_back(make_gt(x, y, o, o % 2 == 0 ? 2 : 6));
      Detection d = make_det(x, y, score, o % 2 == 0 ? 2 : 6);
      fr.detections.push_back(d);
    }
    seq.frames.push_back(std::move(fr));
  }
  seq.validate();
  return seq;
}

std::vector<std::vector<Detection>> detections_of(const FrameSequence& seq) {
  std::vector<std::vector<Detection>> dets;
  for (const Frame& f : seq.frames) dets.push_back(f.detections);
  return dets;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.sequence_clip_length = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.noise.sigma_pos = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("perturb_boxes augmentation contract") {
  std::vector<Detection> dets{make_det(1.0, 2.0, 0.7, 3, 0.4), make_det(-4.0, 0.5, 0.2, 1, -2.9)};

  std::mt19937_64 rng(1);
  NoiseSigmas zero{0.0, 0.0, 0.0};
  const auto same = perturb_boxes(dets, zero, rng);
  REQUIRE(same.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(same[i].box.center == dets[i].box.center);
    CHECK(same[i].box.size == dets[i].box.size);
    CHECK(same[i].box.yaw == dets[i].box.yaw);
    CHECK(same[i].score == dets[i].score);
    CHECK(same[i].class_id == dets[i].class_id);
  }

  // zero-mean: per-axis mean displacement within 3 sigma / sqrt(n)
  NoiseSigmas noise{0.5, 0.0, 0.0};
  const int n = 100000;
  std::vector<Detection> one{make_det(0.0, 0.0)};
  std::mt19937_64 rng2(7);
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    const auto p = perturb_boxes(one, noise, rng2);
    mx += p[0].box.center[0];
    my += p[0].box.center[1];
  }
  const double bound = 3.0 * 0.5 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mx / n) <= bound);
  CHECK(std::abs(my / n) <= bound);

  // sizes clamp at 0.05 under violent size noise; yaw stays normalized
  NoiseSigmas rough{0.0, 50.0, 10.0};
  std::mt19937_64 rng3(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = perturb_boxes(dets, rough, rng3);
    for (const auto& d : p) {
      for (int a = 0; a < 3; ++a) CHECK(d.box.size[a] >= 0.05);
      CHECK(d.box.yaw > -M_PI - 1e-12);
      CHECK(d.box.yaw <= M_PI + 1e-12);
      CHECK_NOTHROW(d.box.validate());
    }
  }

  // identical generator state -> identical draws
  std::mt19937_64 ra(11), rb(11);
  NoiseSigmas typical{};
  const auto pa = perturb_boxes(dets, typical, ra);
  const auto pb = perturb_boxes(dets, typical, rb);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].box.center == pb[i].box.center);
    CHECK(pa[i].box.size == pb[i].box.size);
    CHECK(pa[i].box.yaw == pb[i].box.yaw);
  }
}

TEST_CASE("smoother frame loss equals the assignment's total cost") {
  const int L = 4, C = 3;
  Eigen::MatrixXd box(L, 7), probs(L, C), score(L, 1);
  box << 0.5, 0.2, 0.9, 1.8, 4.2, 1.6, 0.3,   //
      9.5, -0.4, 1.0, 2.1, 4.9, 1.8, -0.2,    //
      -6.0, 3.0, 0.8, 0.9, 1.8, 1.5, 2.8,     //
      4.0, -7.0, 1.1, 2.4, 6.8, 2.6, 1.1;
  probs << 0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4, 0.25, 0.5, 0.25;
  score << 0.85, 0.7, 0.25, 0.4;

  std::vector<GroundTruthObject> gts{make_gt(0.4, 0.1, 0, 0, 0.25), make_gt(9.8, -0.2, 1, 1, -0.1)};

  for (bool with_giou : {false, true}) {
    auto w = with_giou ? match::MatchWeights::tracker_defaults()
                       : match::MatchWeights::smoother_defaults();
    const auto fl = smoother_frame_loss(as_outputs(fake_heads(box, probs, score)), gts, w, C);

    // oracle: numeric cost matrix + Hungarian over null-padded gts
    std::vector<match::MatchCandidate> cands(L);
    for (int i = 0; i < L; ++i) {
      cands[i].box.center = {box(i, 0), box(i, 1), box(i, 2)};
      cands[i].box.size = {box(i, 3), box(i, 4), box(i, 5)};
      cands[i].box.yaw = box(i, 6);
      cands[i].score = score(i, 0);
      cands[i].class_probs = {probs(i, 0), probs(i, 1), probs(i, 2)};
    }
    const auto padded = match::pad_ground_truth(gts, L);
    const auto asg = match::hungarian_assign(match::match_cost_matrix(cands, padded, w, C));
    CHECK(fl.loss.item() == doctest::Approx(asg.total_cost).epsilon(1e-10));

    // assignment agreement: real targets mirror the oracle's pairs
    for (const auto& [r, c] : asg.pairs) {
      if (padded[static_cast<std::size_t>(c)].is_null)
        CHECK(fl.target_of[static_cast<std::size_t>(r)] == -1);
      else
        CHECK(fl.target_of[static_cast<std::size_t>(r)] == c);
    }
    CHECK(fl.loss.item() == doctest::Approx(fl.bbox + fl.cls + fl.giou).epsilon(1e-10));
    if (!with_giou) CHECK(fl.giou == 0.0);
  }
}

TEST_CASE("pure background frame sums negative focal terms") {
  Eigen::MatrixXd box(2, 7), probs(2, 2), score(2, 1);
  box << 0, 0, 1, 1, 2, 1, 0, 5, 5, 1, 1, 2, 1, 0;
  probs << 0.6, 0.4, 0.3, 0.7;
  score << 0.8, 0.3;

  const auto w = match::MatchWeights::smoother_defaults();
  const auto fl =
      smoother_frame_loss(as_outputs(fake_heads(box, probs, score)), {}, w, 2);
  const double expect = w.w_cls * (match::focal_loss(0.8, false, w.focal_alpha, w.focal_gamma) +
                                   match::focal_loss(0.3, false, w.focal_alpha, w.focal_gamma));
  CHECK(fl.loss.item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(fl.target_of == std::vector<int>{-1, -1});
  CHECK(fl.bbox == 0.0);
}

TEST_CASE("perfect predictions give near-zero loss") {
  std::vector<GroundTruthObject> gts{make_gt(1.0, 2.0, 0, 0), make_gt(-3.0, 4.0, 1, 1)};
  Eigen::MatrixXd box(2, 7), probs(2, 2), score(2, 1);
  for (int i = 0; i < 2; ++i) {
    const auto& g = gts[static_cast<std::size_t>(i)];
    box.row(i) << g.box.center[0], g.box.center[1], g.box.center[2], g.box.size[0], g.box.size[1],
        g.box.size[2], g.box.yaw;
  }
  probs << 1.0, 0.0, 0.0, 1.0;
  score << 1.0, 1.0;

  const auto fl = smoother_frame_loss(as_outputs(fake_heads(box, probs, score)), gts,
                                      match::MatchWeights::smoother_defaults(), 2);
  CHECK(fl.loss.item() < 1e-4);
  CHECK(fl.target_of == std::vector<int>{0, 1});
}

TEST_CASE("frame loss gradient matches finite differences") {
  Eigen::MatrixXd box(3, 7), probs(3, 3), score(3, 1);
  box << 0.6, 0.3, 0.8, 1.7, 4.1, 1.5, 0.35,  //
      9.4, -0.5, 1.1, 2.2, 5.1, 1.9, -0.25,   //
      -6.2, 3.2, 0.9, 1.0, 1.9, 1.4, 2.6;
  probs << 0.6, 0.25, 0.15, 0.2, 0.55, 0.25, 0.35, 0.4, 0.25;
  score << 0.8, 0.65, 0.3;
  std::vector<GroundTruthObject> gts{make_gt(0.4, 0.1, 0, 0, 0.2), make_gt(9.9, -0.1, 1, 1, -0.1)};

  auto heads = fake_heads(box, probs, score, /*as_params=*/true);
  auto w = match::MatchWeights::tracker_defaults();  // exercises the GIoU graph
  auto rep = nn::grad_check(
      [&] { return smoother_frame_loss(as_outputs(heads), gts, w, 3).loss; },
      {heads.box7, heads.probs, heads.score});
  INFO(rep.describe());
  CHECK(rep.max_rel_err <= 1e-5);
}

TEST_CASE("tracker persistent bindings beat proximity") {
  // decoded boxes sit swapped on top of the other object's gt
  std::vector<GroundTruthObject> gts{make_gt(0.0, 0.0, 7), make_gt(10.0, 0.0, 9)};
  Eigen::MatrixXd box(2, 7), probs(2, 7), score(2, 1);
  box << 10.0, 0.0, 0.9, 1.9, 4.5, 1.7, 0.0,  // near instance 9
      0.0, 0.0, 0.9, 1.9, 4.5, 1.7, 0.0;      // near instance 7
  probs.setConstant(1.0 / 7.0);
  score << 0.9, 0.9;

  const auto w = match::MatchWeights::tracker_defaults();
  const auto tl = tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), gts, {7, 9}, w, 7);
  CHECK(tl.target_of == std::vector<int>{0, 1});  // identity, not proximity
  CHECK(tl.bindings_out == std::vector<std::int64_t>{7, 9});

  // the object bound to query 0 left the scene: null target, binding dropped
  std::vector<GroundTruthObject> only_b{make_gt(10.0, 0.0, 9)};
  const auto tl2 =
      tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), only_b, {7, 9}, w, 7);
  CHECK(tl2.target_of == std::vector<int>{-1, 0});
  CHECK(tl2.bindings_out == std::vector<std::int64_t>{-1, 9});

  // an orphaned query may re-bind to an unclaimed newcomer
  std::vector<GroundTruthObject> newcomer{make_gt(9.8, 0.3, 12)};
  const auto tl3 =
      tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), newcomer, {7, 9}, w, 7);
  CHECK(tl3.target_of == std::vector<int>{0, -1});  // row 0 is the nearby box
  CHECK(tl3.bindings_out == std::vector<std::int64_t>{12, -1});

  CHECK_THROWS_AS(
      tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), gts, {7, 7}, w, 7),
      ValidationError);
  CHECK_THROWS_AS(
      tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), gts, {7}, w, 7),
      ValidationError);
}

TEST_CASE("tracker births bind through the assignment round") {
  std::vector<GroundTruthObject> gts{make_gt(0.0, 0.0, 3), make_gt(12.0, 0.0, 4)};
  Eigen::MatrixXd box(3, 7), probs(3, 7), score(3, 1);
  box << 11.8, 0.1, 0.9, 1.9, 4.5, 1.7, 0.0,  //
      0.2, -0.1, 0.9, 1.9, 4.5, 1.7, 0.0,     //
      -20.0, 15.0, 0.9, 1.9, 4.5, 1.7, 0.0;   // matches nothing
  probs.setConstant(1.0 / 7.0);
  score << 0.9, 0.9, 0.8;

  const auto w = match::MatchWeights::tracker_defaults();
  const auto tl = tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), gts,
                                     {-1, -1, -1}, w, 7);
  CHECK(tl.target_of == std::vector<int>{1, 0, -1});
  CHECK(tl.bindings_out == std::vector<std::int64_t>{4, 3, -1});

  // a bound query keeps its gt out of the birth pool
  const auto tl2 = tracker_frame_loss(as_decoded(fake_heads(box, probs, score)), gts,
                                      {-1, 3, -1}, w, 7);
  CHECK(tl2.target_of == std::vector<int>{1, 0, -1});
  CHECK(tl2.bindings_out == std::vector<std::int64_t>{4, 3, -1});
}

TEST_CASE("dataset builders shape windows and clips") {
  const auto seq = scripted_sequence(10, 2);
  const auto dets = detections_of(seq);

  const auto data = build_smoother_dataset(seq, dets, 2, WindowMode::kOffline);
  REQUIRE(data.size() == 10);
  CHECK(data.front().window.key_frame == 0);
  CHECK(data.front().window.slot_count() == 5);
  CHECK(data.back().window.key_frame == 9);
  for (const auto& s : data) REQUIRE(s.gts.size() == 2);
  CHECK_THROWS_AS(build_smoother_dataset(seq, {}, 2, WindowMode::kOffline), ValidationError);

  const auto clips = build_tracker_clips(seq, dets, 4);
  REQUIRE(clips.size() == 3);  // 4 + 4 + 2
  CHECK(clips[0].smoothed.size() == 4);
  CHECK(clips[1].smoothed.size() == 4);
  CHECK(clips[2].smoothed.size() == 2);
  CHECK(clips[0].clouds.empty());
  CHECK_THROWS_AS(build_tracker_clips(seq, dets, 0), ValidationError);

  const auto singles = build_tracker_clips(seq, dets, 1);
  CHECK(singles.size() == 10);  // clip length 1: per-frame training
}

TEST_CASE("train_smoother drives the loss down deterministically") {
  const auto seq = scripted_sequence(4, 2);
  const auto data = build_smoother_dataset(seq, detections_of(seq), 1, WindowMode::kOffline);

  model::SmootherParams mp;
  mp.k = 1;
  mp.d = 12;
  mp.heads = 2;
  mp.encoder_layers = 1;
  mp.decoder_layers = 1;

  TrainConfig cfg;
  cfg.stage = Stage::kSmoother;
  cfg.epochs = 30;
  cfg.learning_rate = 2e-3;
  cfg.noise = NoiseSigmas{0.0, 0.0, 0.0};
  cfg.seed = 5;

  auto run = [&] {
    nn::ParameterStore ps(5);
    model::Smoother model(ps, mp, ClassTable());
    return train_smoother(model, ps, data, cfg);
  };
  const auto r1 = run();
  REQUIRE(r1.curve.size() == 30);
  CHECK(r1.final_loss < r1.initial_loss);
  for (const auto& rec : r1.curve) CHECK(rec.loss >= 0.0);

  const auto r2 = run();
  for (std::size_t e = 0; e < r1.curve.size(); ++e) {
    CHECK(r1.curve[e].loss == r2.curve[e].loss);
    CHECK(r1.curve[e].bbox == r2.curve[e].bbox);
    CHECK(r1.curve[e].cls == r2.curve[e].cls);
  }

  TrainConfig bad = cfg;
  bad.stage = Stage::kTracker;
  nn::ParameterStore ps(5);
  model::Smoother model(ps, mp, ClassTable());
  CHECK_THROWS_AS(train_smoother(model, ps, data, bad), ValidationError);
  CHECK_THROWS_AS(train_smoother(model, ps, {}, cfg), ValidationError);
}

TEST_CASE("train_tracker unrolls clips and converges deterministically") {
  const auto seq = scripted_sequence(4, 2, 0.95);
  const auto clips = build_tracker_clips(seq, detections_of(seq), 2);
  REQUIRE(clips.size() == 2);

  model::TrackerParams tp;
  tp.d = 16;
  tp.heads = 2;
  tp.decoder_layers = 1;
  tp.history_capacity = 4;

  TrainConfig cfg;
  cfg.stage = Stage::kTracker;
  cfg.epochs = 25;
  cfg.learning_rate = 2e-3;
  cfg.weights = match::MatchWeights::tracker_defaults();
  cfg.noise = NoiseSigmas{0.0, 0.0, 0.0};
  cfg.seed = 9;

  auto run = [&] {
    nn::ParameterStore ps(9);
    model::Tracker tracker(ps, tp, ClassTable());
    return train_tracker(tracker, ps, clips, cfg);
  };
  const auto r1 = run();
  REQUIRE(r1.curve.size() == 25);
  CHECK(r1.final_loss < r1.initial_loss);
  for (const auto& rec : r1.curve) CHECK(rec.loss >= 0.0);

  const auto r2 = run();
  for (std::size_t e = 0; e < r1.curve.size(); ++e) CHECK(r1.curve[e].loss == r2.curve[e].loss);

  TrainConfig bad = cfg;
  bad.stage = Stage::kSmoother;
  nn::ParameterStore ps(9);
  model::Tracker tracker(ps, tp, ClassTable());
  CHECK_THROWS_AS(train_tracker(tracker, ps, clips, bad), ValidationError);
  CHECK_THROWS_AS(train_tracker(tracker, ps, {}, cfg), ValidationError);
}

TEST_CASE("two-frame clip gradient passes finite differences") {
  model::TrackerParams tp;
  tp.d = 16;
  tp.heads = 2;
  tp.decoder_layers = 1;
  tp.history_capacity = 4;
  nn::ParameterStore ps(31);
  model::Tracker tracker(ps, tp, ClassTable());

  std::vector<std::vector<Detection>> smoothed{
      {make_det(0.0, 0.0, 0.9), make_det(8.0, 0.0, 0.85)},
      {make_det(1.0, 0.0, 0.9), make_det(9.0, 0.0, 0.85)}};
  std::vector<std::vector<GroundTruthObject>> gts{
      {make_gt(0.5, 0.0, 1), make_gt(8.5, 0.0, 2)},
      {make_gt(1.5, 0.0, 1), make_gt(9.5, 0.0, 2)}};

  const auto weights = match::MatchWeights::tracker_defaults();
  auto clip_loss = [&] {
    model::TrackerFrameState state;
    std::vector<std::int64_t> state_bindings;
    nn::Tensor carried, box_chain;
    nn::Tensor total = nn::Tensor::constant(Eigen::MatrixXd::Zero(1, 1));
    for (std::size_t t = 0; t < smoothed.size(); ++t) {
      const auto sr = tracker.step(smoothed[t], state, pc::FeatureTokens{},
                                   carried.defined() ? &carried : nullptr,
                                   box_chain.defined() ? &box_chain : nullptr);
      std::vector<std::int64_t> bindings_in(sr.queries.size(), -1);
      for (std::size_t i = 0; i < sr.queries.size(); ++i)
        if (!sr.queries[i].is_birth) bindings_in[i] = state_bindings[sr.queries[i].state_index];
      const auto tl = tracker_frame_loss(sr.decoded, gts[t], bindings_in, weights, 7);
      total = nn::add(total, tl.loss);
      state_bindings.assign(sr.state.tracks.size(), -1);
      for (std::size_t j = 0; j < sr.survivors.size(); ++j)
        state_bindings[j] = tl.bindings_out[static_cast<std::size_t>(sr.survivors[j])];
      if (sr.state.tracks.empty()) {
        carried = nn::Tensor{};
        box_chain = nn::Tensor{};
      } else {
        carried = nn::gather_rows(sr.carried_out, sr.survivors);
        box_chain = nn::gather_rows(
            nn::concat_cols({sr.decoded.box7, sr.decoded.score}), sr.survivors);
      }
      state = sr.state;
    }
    return total;
  };

  auto rep = nn::grad_check(clip_loss, ps.all());
  INFO(rep.describe());
  CHECK(rep.max_rel_err <= 1e-5);
}

}  // TEST_SUITE
