// SPDX-License-Identifier: Apache-2.0
#include "lmot/train/diagnostics.hpp"

#include <random>

#include "lmot/train/trainer.hpp"

namespace lmot::train {
namespace {

Eigen::MatrixXd randn(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                      double sigma = 1.0) {
  std::normal_distribution<double> dist(0.0, sigma);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

GroundTruthObject gt_at(double x, double y, std::int64_t instance, int cls) {
  GroundTruthObject g;
  g.box.center = {x, y, 0.9};
  g.box.size = {1.9, 4.5, 1.7};
  g.class_id = cls;
  g.instance_id = instance;
  return g;
}

Detection det_at(double x, double y, double score, int cls) {
  Detection d;
  d.box.center = {x, y, 0.9};
  d.box.size = {1.9, 4.5, 1.7};
  d.class_id = cls;
  d.score = score;
  return d;
}

// Two well-separated predictions vs. three ground truths: one match per
// prediction plus an unmatched gt, far enough apart that the assignment is
// stable under finite-difference probes.
struct LossFixture {
  nn::Tensor box, logits, raw_score;
  std::vector<GroundTruthObject> gts;

  explicit LossFixture(std::mt19937_64& rng) {
    Eigen::MatrixXd b(2, 7);
    b << 0.4, 0.1, 0.8, 1.8, 4.2, 1.6, 0.05,  //
        10.2, -6.1, 1.0, 2.1, 4.8, 1.8, -0.1;
    box = nn::Tensor::param(b, "fix.box");
    logits = nn::Tensor::param(randn(rng, 2, 7, 0.3), "fix.logits");
    raw_score = nn::Tensor::param(randn(rng, 2, 1, 0.3), "fix.score");
    gts = {gt_at(0.0, 0.0, 1, 2), gt_at(10.0, -6.0, 2, 6), gt_at(-20.0, 15.0, 3, 0)};
  }

  model::Smoother::Outputs outputs() const {
    model::Smoother::Outputs out;
    out.box7 = box;
    out.class_probs = nn::softmax_rows(logits);
    out.score = nn::sigmoid(raw_score);
    return out;
  }

  std::vector<nn::Tensor> params() const { return {box, logits, raw_score}; }
};

BlockCheck check_loss_term(const std::string& name, const match::MatchWeights& weights,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LossFixture fix(rng);
  auto loss = [&] { return smoother_frame_loss(fix.outputs(), fix.gts, weights, 7).loss; };
  return {name, nn::grad_check(loss, fix.params())};
}

BlockCheck check_linear(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps(seed);
  nn::Linear lin(ps, "lin", 5, 3);
  const nn::Tensor x = nn::Tensor::param(randn(rng, 4, 5), "lin.x");
  const Eigen::MatrixXd c = randn(rng, 4, 3);
  auto loss = [&] {
    const nn::Tensor y = lin.forward(x);
    return nn::sum_all(nn::mul(y, nn::add(y, nn::Tensor::constant(c))));
  };
  std::vector<nn::Tensor> params = ps.all();
  params.push_back(x);
  return {"linear", nn::grad_check(loss, params)};
}

BlockCheck check_layer_norm(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps(seed);
  nn::LayerNorm ln(ps, "ln", 6);
  const nn::Tensor x = nn::Tensor::param(randn(rng, 3, 6), "ln.x");
  const Eigen::MatrixXd c = randn(rng, 3, 6);
  auto loss = [&] { return nn::sum_all(nn::mul(ln.forward(x), nn::Tensor::constant(c))); };
  std::vector<nn::Tensor> params = ps.all();
  params.push_back(x);
  return {"layer_norm", nn::grad_check(loss, params)};
}

BlockCheck check_attention(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps(seed);
  nn::MultiHeadAttention mha(ps, "mha", nn::AttentionConfig{16, 2});
  const nn::Tensor q = nn::Tensor::param(randn(rng, 3, 16, 0.5), "mha.q");
  const nn::Tensor kv = nn::Tensor::param(randn(rng, 4, 16, 0.5), "mha.kv");
  const Eigen::MatrixXd c = randn(rng, 3, 16);
  auto loss = [&] {
    return nn::sum_all(nn::mul(mha.forward(q, kv, kv), nn::Tensor::constant(c)));
  };
  std::vector<nn::Tensor> params = ps.all();
  params.push_back(q);
  params.push_back(kv);
  return {"multi_head_attention", nn::grad_check(loss, params)};
}

BlockCheck check_ffn(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::ParameterStore ps(seed);
  nn::FFN ffn(ps, "ffn", 8, 16, 8);
  const nn::Tensor x = nn::Tensor::param(randn(rng, 3, 8, 0.5), "ffn.x");
  const Eigen::MatrixXd c = randn(rng, 3, 8);
  auto loss = [&] { return nn::sum_all(nn::mul(ffn.forward(x), nn::Tensor::constant(c))); };
  std::vector<nn::Tensor> params = ps.all();
  params.push_back(x);
  return {"ffn", nn::grad_check(loss, params)};
}

BlockCheck check_smoother_window(std::uint64_t seed) {
  model::SmootherParams sp;
  sp.k = 1;
  sp.d = 12;
  sp.heads = 2;
  sp.encoder_layers = 1;
  sp.decoder_layers = 1;
  nn::ParameterStore ps(seed);
  model::Smoother smoother(ps, sp, ClassTable());

  FrameSequence seq;
  seq.id = "gradcheck";
  for (int f = 0; f < 2; ++f) {
    Frame fr;
    fr.frame_idx = f;
    fr.timestamp_us = 500000LL * f;
    fr.ground_truth = {gt_at(0.5 + f, 0.0, 1, 2), gt_at(-6.0, 4.0 + f, 2, 6)};
    seq.frames.push_back(std::move(fr));
  }
  const std::vector<std::vector<Detection>> dets{
      {det_at(0.4, 0.1, 0.9, 2), det_at(-6.2, 3.9, 0.8, 6)},
      {det_at(1.6, -0.1, 0.9, 2), det_at(-5.9, 5.1, 0.8, 6)}};
  const SmootherDataset data = build_smoother_dataset(seq, dets, sp.k, sp.mode);

  const auto weights = match::MatchWeights::smoother_defaults();
  auto loss = [&] {
    return smoother_frame_loss(smoother.forward(data[0].window), data[0].gts, weights, 7).loss;
  };
  return {"smoother_window_loss", nn::grad_check(loss, ps.all())};
}

BlockCheck check_tracker_clip(std::uint64_t seed) {
  model::TrackerParams tp;
  tp.d = 16;
  tp.heads = 2;
  tp.decoder_layers = 1;
  tp.history_capacity = 4;
  nn::ParameterStore ps(seed);
  model::Tracker tracker(ps, tp, ClassTable());

  const std::vector<std::vector<Detection>> smoothed{
      {det_at(0.0, 0.0, 0.9, 2), det_at(8.0, 0.0, 0.85, 6)},
      {det_at(1.0, 0.0, 0.9, 2), det_at(9.0, 0.0, 0.85, 6)}};
  const std::vector<std::vector<GroundTruthObject>> gts{
      {gt_at(0.5, 0.0, 1, 2), gt_at(8.5, 0.0, 2, 6)},
      {gt_at(1.5, 0.0, 1, 2), gt_at(9.5, 0.0, 2, 6)}};

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
        box_chain =
            nn::gather_rows(nn::concat_cols({sr.decoded.box7, sr.decoded.score}), sr.survivors);
      }
      state = sr.state;
    }
    return total;
  };
  return {"tracker_clip_loss", nn::grad_check(clip_loss, ps.all())};
}

}  // namespace

std::vector<BlockCheck> gradcheck_suite(std::uint64_t seed) {
  match::MatchWeights l1;
  l1.w_bbox = 1.0;
  l1.w_cls = 0.0;
  match::MatchWeights focal;
  focal.w_bbox = 0.0;
  focal.w_cls = 1.0;
  focal.focal_alpha = 0.25;
  focal.focal_gamma = 2.0;
  match::MatchWeights giou;
  giou.w_bbox = 0.0;
  giou.w_cls = 0.0;
  giou.include_giou = true;
  giou.giou_weight = 1.0;

  std::vector<BlockCheck> out;
  out.push_back(check_linear(seed + 1));
  out.push_back(check_layer_norm(seed + 2));
  out.push_back(check_attention(seed + 3));
  out.push_back(check_ffn(seed + 4));
  out.push_back(check_loss_term("l1_box_loss", l1, seed + 5));
  out.push_back(check_loss_term("focal_loss", focal, seed + 6));
  out.push_back(check_loss_term("giou_loss", giou, seed + 7));
  out.push_back(check_smoother_window(seed + 8));
  out.push_back(check_tracker_clip(seed + 9));
  return out;
}

}  // namespace lmot::train
