// SPDX-License-Identifier: Apache-2.0
#include "lmot/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "lmot/common.hpp"
#include "lmot/geom/geometry.hpp"
#include "lmot/match/hungarian.hpp"
#include "lmot/nn/optim.hpp"

namespace lmot::train {

void NoiseSigmas::validate() const {
  if (!(sigma_pos >= 0.0) || !(sigma_size >= 0.0) || !(sigma_yaw >= 0.0))
    throw ValidationError("NoiseSigmas: sigmas must be non-negative");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("TrainConfig: epochs must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("TrainConfig: learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("TrainConfig: batch_size must be positive");
  if (sequence_clip_length < 1)
    throw ValidationError("TrainConfig: sequence_clip_length must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("TrainConfig: weight_decay must be >= 0");
  weights.validate();
  noise.validate();
}

std::vector<Detection> perturb_boxes(const std::vector<Detection>& dets,
                                     const NoiseSigmas& noise, std::mt19937_64& rng) {
  noise.validate();
  auto draw = [&rng](double sigma) {
    if (sigma <= 0.0) return 0.0;
    std::normal_distribution<double> n(0.0, sigma);
    return n(rng);
  };
  std::vector<Detection> out = dets;
  for (Detection& d : out) {
    for (int a = 0; a < 3; ++a) d.box.center[a] += draw(noise.sigma_pos);
    for (int a = 0; a < 3; ++a)
      d.box.size[a] = std::max(0.05, d.box.size[a] + draw(noise.sigma_size));
    d.box.yaw = normalize_yaw(d.box.yaw + draw(noise.sigma_yaw));
  }
  return out;
}

namespace {

using nn::Tensor;

std::vector<match::MatchCandidate> detached_candidates(const Eigen::MatrixXd& box,
                                                       const Eigen::MatrixXd& score,
                                                       const Eigen::MatrixXd& probs) {
  std::vector<match::MatchCandidate> cands(static_cast<std::size_t>(box.rows()));
  for (Eigen::Index i = 0; i < box.rows(); ++i) {
    auto& c = cands[static_cast<std::size_t>(i)];
    c.box.center = {box(i, 0), box(i, 1), box(i, 2)};
    c.box.size = {box(i, 3), box(i, 4), box(i, 5)};
    c.box.yaw = box(i, 6);
    c.score = score(i, 0);
    c.class_probs.resize(static_cast<std::size_t>(probs.cols()));
    for (Eigen::Index j = 0; j < probs.cols(); ++j)
      c.class_probs[static_cast<std::size_t>(j)] = probs(i, j);
  }
  return cands;
}

Tensor cmin(const Tensor& a, const Tensor& b) {
  return nn::scale(nn::sub(nn::add(a, b), nn::abs_t(nn::sub(a, b))), 0.5);
}
Tensor cmax(const Tensor& a, const Tensor& b) {
  return nn::scale(nn::add(nn::add(a, b), nn::abs_t(nn::sub(a, b))), 0.5);
}

// Differentiable 1 - GIoU of the predictions' axis-aligned hulls against
// fixed gt hulls, summed over the matched rows. Mirrors geom::giou_aabb.
Tensor giou_sum_graph(const Tensor& pred_rows, const std::vector<const GroundTruthObject*>& gt) {
  const auto m = pred_rows.rows();
  Eigen::MatrixXd bmin[3], bmax[3], vb(m, 1);
  for (int a = 0; a < 3; ++a) {
    bmin[a].resize(m, 1);
    bmax[a].resize(m, 1);
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    const geom::AABB3 ab = geom::box_to_aabb(gt[static_cast<std::size_t>(r)]->box);
    for (int a = 0; a < 3; ++a) {
      bmin[a](r, 0) = ab.min[a];
      bmax[a](r, 0) = ab.max[a];
    }
    vb(r, 0) = ab.volume();
  }

  auto col = [&](int c) { return nn::slice_cols(pred_rows, c, 1); };
  const Tensor yaw = col(6);
  const Tensor ac = nn::abs_t(nn::cos_t(yaw)), as = nn::abs_t(nn::sin_t(yaw));
  const Tensor w = col(3), l = col(4), h = col(5);
  const Tensor ex = nn::scale(nn::add(nn::mul(l, ac), nn::mul(w, as)), 0.5);
  const Tensor ey = nn::scale(nn::add(nn::mul(l, as), nn::mul(w, ac)), 0.5);
  const Tensor ez = nn::scale(h, 0.5);
  const Tensor pmin[3] = {nn::sub(col(0), ex), nn::sub(col(1), ey), nn::sub(col(2), ez)};
  const Tensor pmax[3] = {nn::add(col(0), ex), nn::add(col(1), ey), nn::add(col(2), ez)};

  Tensor inter, hull;
  for (int a = 0; a < 3; ++a) {
    const Tensor gmin = Tensor::constant(bmin[a]), gmax = Tensor::constant(bmax[a]);
    const Tensor ilen = nn::relu(nn::sub(cmin(pmax[a], gmax), cmax(pmin[a], gmin)));
    const Tensor hlen = nn::sub(cmax(pmax[a], gmax), cmin(pmin[a], gmin));
    inter = a == 0 ? ilen : nn::mul(inter, ilen);
    hull = a == 0 ? hlen : nn::mul(hull, hlen);
  }
  const Tensor va = nn::mul(nn::mul(nn::scale(ex, 2.0), nn::scale(ey, 2.0)), h);
  const Tensor uni = nn::sub(nn::add(va, Tensor::constant(vb)), inter);
  const Tensor giou = nn::sub(nn::div(inter, uni), nn::div(nn::sub(hull, uni), hull));
  return nn::sum_all(nn::add_scalar(nn::scale(giou, -1.0), 1.0));
}

struct LossParts {
  Tensor loss;
  double bbox = 0.0, cls = 0.0, giou = 0.0;
};

// Rebuilds the Eq.-2/Eq.-4 matched cost from graph tensors for a fixed
// assignment: box L1 (wrapped yaw) + focal terms + optional GIoU.
LossParts assemble_loss(const Tensor& box7, const Tensor& probs, const Tensor& score,
                        const std::vector<int>& target_of,
                        const std::vector<GroundTruthObject>& gts,
                        const match::MatchWeights& w) {
  std::vector<Eigen::Index> matched, unmatched;
  std::vector<const GroundTruthObject*> mgt;
  for (std::size_t i = 0; i < target_of.size(); ++i) {
    if (target_of[i] >= 0) {
      matched.push_back(static_cast<Eigen::Index>(i));
      mgt.push_back(&gts[static_cast<std::size_t>(target_of[i])]);
    } else {
      unmatched.push_back(static_cast<Eigen::Index>(i));
    }
  }

  const double floor = match::kProbClamp;
  std::vector<Tensor> terms;
  LossParts out;
  if (!matched.empty()) {
    const auto m = static_cast<Eigen::Index>(matched.size());
    const auto n_cls = probs.cols();
    Eigen::MatrixXd gbox(m, 7), shift = Eigen::MatrixXd::Zero(m, 7);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(m, n_cls);
    const Eigen::MatrixXd& bv = box7.value();
    for (Eigen::Index r = 0; r < m; ++r) {
      const GroundTruthObject& g = *mgt[static_cast<std::size_t>(r)];
      gbox.row(r) << g.box.center[0], g.box.center[1], g.box.center[2], g.box.size[0],
          g.box.size[1], g.box.size[2], g.box.yaw;
      const double dyaw = bv(matched[static_cast<std::size_t>(r)], 6) - g.box.yaw;
      shift(r, 6) = normalize_yaw(dyaw) - dyaw;  // constant 2*pi multiple
      onehot(r, g.class_id) = 1.0;
    }
    const Tensor pred = nn::gather_rows(box7, matched);
    const Tensor diff =
        nn::add(nn::sub(pred, Tensor::constant(gbox)), Tensor::constant(shift));
    const Tensor l1 = nn::scale(nn::sum_all(nn::abs_t(diff)), 1.0 / 7.0);
    terms.push_back(nn::scale(l1, w.w_bbox));
    out.bbox = terms.back().item();

    const Tensor psel = nn::matmul(nn::mul(nn::gather_rows(probs, matched),
                                           Tensor::constant(onehot)),
                                   Tensor::constant(Eigen::MatrixXd::Ones(n_cls, 1)));
    const Tensor p = nn::clamp_t(nn::mul(nn::gather_rows(score, matched), psel), floor,
                                 1.0 - floor);
    const Tensor pos = nn::scale(
        nn::sum_all(nn::mul(nn::pow_scalar(nn::add_scalar(nn::scale(p, -1.0), 1.0),
                                           w.focal_gamma),
                            nn::log_t(p))),
        -w.focal_alpha);
    terms.push_back(nn::scale(pos, w.w_cls));
    out.cls += terms.back().item();

    if (w.include_giou) {
      terms.push_back(nn::scale(giou_sum_graph(pred, mgt), w.giou_weight));
      out.giou = terms.back().item();
    }
  }
  if (!unmatched.empty()) {
    const Tensor s = nn::clamp_t(nn::gather_rows(score, unmatched), floor, 1.0 - floor);
    const Tensor neg = nn::scale(
        nn::sum_all(nn::mul(nn::pow_scalar(s, w.focal_gamma),
                            nn::log_t(nn::add_scalar(nn::scale(s, -1.0), 1.0)))),
        -(1.0 - w.focal_alpha));
    terms.push_back(nn::scale(neg, w.w_cls));
    out.cls += terms.back().item();
  }

  if (terms.empty()) {
    out.loss = Tensor::constant(Eigen::MatrixXd::Zero(1, 1));
    return out;
  }
  out.loss = terms.front();
  for (std::size_t t = 1; t < terms.size(); ++t) out.loss = nn::add(out.loss, terms[t]);
  return out;
}

}  // namespace

FrameLoss smoother_frame_loss(const model::Smoother::Outputs& out,
                              const std::vector<GroundTruthObject>& gts,
                              const match::MatchWeights& weights, std::size_t n_classes) {
  if (!out.box7.defined() || !out.score.defined() || !out.class_probs.defined())
    throw ValidationError("smoother_frame_loss: undefined model outputs");
  const auto n_pred = static_cast<std::size_t>(out.box7.rows());
  const auto cands =
      detached_candidates(out.box7.value(), out.score.value(), out.class_probs.value());
  std::vector<GroundTruthObject> padded =
      gts.size() < n_pred ? match::pad_ground_truth(gts, n_pred) : gts;

  const auto asg = match::hungarian_assign(
      match::match_cost_matrix(cands, padded, weights, n_classes));

  FrameLoss fl;
  fl.target_of.assign(n_pred, -1);
  for (const auto& [row, col] : asg.pairs)
    if (!padded[static_cast<std::size_t>(col)].is_null)
      fl.target_of[static_cast<std::size_t>(row)] = col;

  LossParts parts =
      assemble_loss(out.box7, out.class_probs, out.score, fl.target_of, padded, weights);
  fl.loss = parts.loss;
  fl.bbox = parts.bbox;
  fl.cls = parts.cls;
  fl.giou = parts.giou;
  return fl;
}

TrackerFrameLoss tracker_frame_loss(const model::Tracker::Decoded& decoded,
                                    const std::vector<GroundTruthObject>& gts,
                                    const std::vector<std::int64_t>& bindings,
                                    const match::MatchWeights& weights,
                                    std::size_t n_classes) {
  if (!decoded.box7.defined())
    throw ValidationError("tracker_frame_loss: undefined decoder outputs");
  const auto n = static_cast<std::size_t>(decoded.box7.rows());
  if (bindings.size() != n)
    throw ValidationError("tracker_frame_loss: bindings size does not match queries");

  std::unordered_map<std::int64_t, int> by_instance;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    if (gts[j].is_null || gts[j].instance_id < 0) continue;
    if (!by_instance.emplace(gts[j].instance_id, static_cast<int>(j)).second)
      throw ValidationError("tracker_frame_loss: duplicate gt instance id " +
                            std::to_string(gts[j].instance_id));
  }

  TrackerFrameLoss tl;
  tl.target_of.assign(n, -1);
  tl.bindings_out = bindings;
  std::vector<char> claimed(gts.size(), 0);
  std::unordered_set<std::int64_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t b = bindings[i];
    if (b < 0) continue;
    if (!seen.insert(b).second)
      throw ValidationError("tracker_frame_loss: two queries bound to instance " +
                            std::to_string(b));
    const auto it = by_instance.find(b);
    if (it == by_instance.end()) {
      tl.bindings_out[i] = -1;  // object left the scene: orphaned
    } else {
      tl.target_of[i] = it->second;  // persistent identity wins over proximity
      claimed[static_cast<std::size_t>(it->second)] = 1;
    }
  }

  std::vector<Eigen::Index> pool;
  for (std::size_t i = 0; i < n; ++i)
    if (tl.target_of[i] < 0 && tl.bindings_out[i] < 0)
      pool.push_back(static_cast<Eigen::Index>(i));
  std::vector<int> unclaimed;
  for (std::size_t j = 0; j < gts.size(); ++j)
    if (!claimed[j] && !gts[j].is_null) unclaimed.push_back(static_cast<int>(j));

  if (!pool.empty()) {
    const auto cands_all =
        detached_candidates(decoded.box7.value(), decoded.score.value(),
                            decoded.class_probs.value());
    std::vector<match::MatchCandidate> cands;
    cands.reserve(pool.size());
    for (const auto i : pool) cands.push_back(cands_all[static_cast<std::size_t>(i)]);
    std::vector<GroundTruthObject> pool_gts;
    pool_gts.reserve(unclaimed.size());
    for (const int j : unclaimed) pool_gts.push_back(gts[static_cast<std::size_t>(j)]);
    if (pool_gts.size() < pool.size())
      pool_gts = match::pad_ground_truth(std::move(pool_gts), pool.size());

    const auto asg = match::hungarian_assign(
        match::match_cost_matrix(cands, pool_gts, weights, n_classes));
    for (const auto& [row, col] : asg.pairs) {
      if (static_cast<std::size_t>(col) >= unclaimed.size()) continue;  // null pad
      const auto qi = static_cast<std::size_t>(pool[static_cast<std::size_t>(row)]);
      const int gj = unclaimed[static_cast<std::size_t>(col)];
      tl.target_of[qi] = gj;
      tl.bindings_out[qi] = gts[static_cast<std::size_t>(gj)].instance_id;
    }
  }

  LossParts parts = assemble_loss(decoded.box7, decoded.class_probs, decoded.score,
                                  tl.target_of, gts, weights);
  tl.loss = parts.loss;
  tl.bbox = parts.bbox;
  tl.cls = parts.cls;
  tl.giou = parts.giou;
  return tl;
}

SmootherDataset build_smoother_dataset(const FrameSequence& seq,
                                       const std::vector<std::vector<Detection>>& dets,
                                       int k, WindowMode mode) {
  if (dets.size() != seq.frames.size())
    throw ValidationError("build_smoother_dataset: one detection list per frame required");
  FrameSequence staged = seq;
  for (std::size_t f = 0; f < dets.size(); ++f) staged.frames[f].detections = dets[f];

  SmootherDataset data;
  for (std::size_t f = 0; f < staged.frames.size(); ++f) {
    DetectionWindow win =
        compensate_window(assemble_window(staged, static_cast<int>(f), k, mode), staged);
    if (win.total_detections() == 0) continue;  // nothing to smooth or supervise against
    data.push_back({std::move(win), staged.frames[f].ground_truth});
  }
  return data;
}

std::vector<TrackerClip> build_tracker_clips(const FrameSequence& seq,
                                             const std::vector<std::vector<Detection>>& smoothed,
                                             int clip_length,
                                             const std::vector<pc::StackedCloud>* clouds) {
  if (clip_length < 1) throw ValidationError("build_tracker_clips: clip_length must be positive");
  if (smoothed.size() != seq.frames.size())
    throw ValidationError("build_tracker_clips: one detection list per frame required");
  if (clouds && clouds->size() != seq.frames.size())
    throw ValidationError("build_tracker_clips: one cloud per frame required");

  std::vector<TrackerClip> clips;
  for (std::size_t start = 0; start < seq.frames.size();
       start += static_cast<std::size_t>(clip_length)) {
    const std::size_t stop =
        std::min(seq.frames.size(), start + static_cast<std::size_t>(clip_length));
    TrackerClip clip;
    for (std::size_t f = start; f < stop; ++f) {
      clip.smoothed.push_back(smoothed[f]);
      clip.gts.push_back(seq.frames[f].ground_truth);
      if (clouds) clip.clouds.push_back((*clouds)[f]);
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

namespace {

void record_epoch(TrainResult& res, int epoch, double sum, double bbox, double cls,
                  double giou, std::size_t count) {
  EpochRecord rec;
  rec.epoch = epoch;
  const double n = count > 0 ? static_cast<double>(count) : 1.0;
  rec.loss = sum / n;
  rec.bbox = bbox / n;
  rec.cls = cls / n;
  rec.giou = giou / n;
  res.curve.push_back(rec);
}

}  // namespace

TrainResult train_smoother(model::Smoother& model, nn::ParameterStore& ps,
                           const SmootherDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.stage != Stage::kSmoother)
    throw ValidationError("train_smoother: config stage is not smoother");
  if (data.empty()) throw ValidationError("train_smoother: empty dataset");

  nn::AdamWConfig ocfg;
  ocfg.lr = cfg.learning_rate;
  ocfg.weight_decay = cfg.weight_decay;
  nn::AdamW opt(ps.all(), ocfg);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_classes = model.classes().size();

  TrainResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0, bbox = 0, cls = 0, giou = 0;
    int in_batch = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
      DetectionWindow window = data[s].window;
      if (cfg.noise.enabled())
        for (auto& slot : window.frames) slot.second = perturb_boxes(slot.second, cfg.noise, rng);

      const auto out = model.forward(window);
      FrameLoss fl = smoother_frame_loss(out, data[s].gts, cfg.weights, n_classes);
      const double lv = fl.loss.item();
      if (!std::isfinite(lv))
        throw NumericError("train_smoother: non-finite loss at epoch " + std::to_string(epoch) +
                           ", sample " + std::to_string(s));
      sum += lv;
      bbox += fl.bbox;
      cls += fl.cls;
      giou += fl.giou;

      nn::scale(fl.loss, 1.0 / cfg.batch_size).backward();
      if (++in_batch == cfg.batch_size) {
        opt.step();
        opt.zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      opt.step();
      opt.zero_grad();
    }
    record_epoch(res, epoch, sum, bbox, cls, giou, data.size());
  }
  res.initial_loss = res.curve.front().loss;
  res.final_loss = res.curve.back().loss;
  return res;
}

TrainResult train_tracker(model::Tracker& tracker, nn::ParameterStore& ps,
                          const std::vector<TrackerClip>& clips, const TrainConfig& cfg,
                          const pc::VoxelEncoder* voxels, const pc::VoxelGridSpec& grid) {
  cfg.validate();
  if (cfg.stage != Stage::kTracker)
    throw ValidationError("train_tracker: config stage is not tracker");
  if (clips.empty()) throw ValidationError("train_tracker: no clips");
  for (const TrackerClip& clip : clips) {
    if (clip.smoothed.empty() || clip.smoothed.size() != clip.gts.size())
      throw ValidationError("train_tracker: clip frames inconsistent");
    if (!clip.clouds.empty() && clip.clouds.size() != clip.smoothed.size())
      throw ValidationError("train_tracker: clip clouds inconsistent");
  }

  nn::AdamWConfig ocfg;
  ocfg.lr = cfg.learning_rate;
  ocfg.weight_decay = cfg.weight_decay;
  nn::AdamW opt(ps.all(), ocfg);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_classes = tracker.classes().size();

  TrainResult res;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum = 0, bbox = 0, cls = 0, giou = 0;
    int in_batch = 0;
    for (std::size_t c = 0; c < clips.size(); ++c) {
      const TrackerClip& clip = clips[c];

      model::TrackerFrameState state;
      std::vector<std::int64_t> state_bindings;
      nn::Tensor carried;    // feature chain across the unroll
      nn::Tensor box_chain;  // box+score chain, keeps the encode path live
      nn::Tensor clip_loss = nn::Tensor::constant(Eigen::MatrixXd::Zero(1, 1));

      for (std::size_t t = 0; t < clip.smoothed.size(); ++t) {
        pc::FeatureTokens context;
        if (voxels && t < clip.clouds.size() && !clip.clouds[t].points.empty())
          context = voxels->encode(pc::voxelize(clip.clouds[t], grid));

        std::vector<Detection> frame_dets = clip.smoothed[t];
        if (cfg.noise.enabled()) frame_dets = perturb_boxes(frame_dets, cfg.noise, rng);

        const auto sr =
            tracker.step(frame_dets, state, context, carried.defined() ? &carried : nullptr,
                         box_chain.defined() ? &box_chain : nullptr);
        if (!sr.queries.empty()) {
          std::vector<std::int64_t> bindings_in(sr.queries.size(), -1);
          for (std::size_t i = 0; i < sr.queries.size(); ++i)
            if (!sr.queries[i].is_birth)
              bindings_in[i] = state_bindings[sr.queries[i].state_index];

          TrackerFrameLoss tl =
              tracker_frame_loss(sr.decoded, clip.gts[t], bindings_in, cfg.weights, n_classes);
          const double lv = tl.loss.item();
          if (!std::isfinite(lv))
            throw NumericError("train_tracker: non-finite loss at epoch " +
                               std::to_string(epoch) + ", clip " + std::to_string(c) +
                               ", frame " + std::to_string(t));
          sum += lv;
          bbox += tl.bbox;
          cls += tl.cls;
          giou += tl.giou;
          clip_loss = nn::add(clip_loss, tl.loss);

          state_bindings.assign(sr.state.tracks.size(), -1);
          for (std::size_t j = 0; j < sr.survivors.size(); ++j)
            state_bindings[j] =
                tl.bindings_out[static_cast<std::size_t>(sr.survivors[j])];
        } else {
          state_bindings.assign(sr.state.tracks.size(), -1);
        }
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

      nn::scale(clip_loss, 1.0 / cfg.batch_size).backward();
      if (++in_batch == cfg.batch_size) {
        opt.step();
        opt.zero_grad();
        in_batch = 0;
      }
    }
    if (in_batch > 0) {
      opt.step();
      opt.zero_grad();
    }
    record_epoch(res, epoch, sum, bbox, cls, giou, clips.size());
  }
  res.initial_loss = res.curve.front().loss;
  res.final_loss = res.curve.back().loss;
  return res;
}

}  // namespace lmot::train
