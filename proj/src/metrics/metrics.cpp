// SPDX-License-Identifier: Apache-2.0
#include "lmot/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "lmot/common.hpp"
#include "lmot/geom/geometry.hpp"
#include "lmot/match/hungarian.hpp"

namespace lmot::metrics {

namespace {
// Stand-in cost for beyond-gate pairs; dwarfs any real distance so the
// assignment maximizes in-gate matches first.
constexpr double kUnmatchable = 1e6;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
}  // namespace

void EvalConfig::validate() const {
  if (!(match_distance > 0.0)) throw ValidationError("EvalConfig: match_distance must be positive");
  if (recall_steps < 2) throw ValidationError("EvalConfig: recall_steps must be at least 2");
}

FrameMatchResult match_frame(const std::vector<EvalBox>& preds,
                             const std::vector<GroundTruthObject>& gts, const EvalConfig& config,
                             std::map<std::int64_t, std::int64_t>& id_map) {
  config.validate();
  for (const auto& g : gts)
    if (g.is_null) throw ValidationError("match_frame: ground truth must not contain null padding");

  FrameMatchResult res;
  std::vector<char> pred_used(preds.size(), 0), gt_used(gts.size(), 0);

  if (!preds.empty() && !gts.empty()) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(preds.size()),
                         static_cast<Eigen::Index>(gts.size()));
    for (std::size_t i = 0; i < preds.size(); ++i)
      for (std::size_t j = 0; j < gts.size(); ++j) {
        const double dist = geom::bev_center_distance(preds[i].box, gts[j].box);
        double c = dist <= config.match_distance ? dist : kUnmatchable;
        if (c < kUnmatchable) {
          const auto prior = id_map.find(gts[j].instance_id);
          if (prior != id_map.end() && prior->second == preds[i].id) c -= kPersistenceBonus;
        }
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      }
    for (const auto& [r, c] : match::hungarian_assign(cost).pairs) {
      const double dist = geom::bev_center_distance(preds[static_cast<std::size_t>(r)].box,
                                                    gts[static_cast<std::size_t>(c)].box);
      if (dist > config.match_distance) continue;
      res.tp.emplace_back(r, c, dist);
      pred_used[static_cast<std::size_t>(r)] = 1;
      gt_used[static_cast<std::size_t>(c)] = 1;
      id_map[gts[static_cast<std::size_t>(c)].instance_id] = preds[static_cast<std::size_t>(r)].id;
    }
  }
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!pred_used[i]) res.fp.push_back(static_cast<int>(i));
  for (std::size_t j = 0; j < gts.size(); ++j)
    if (!gt_used[j]) res.fn.push_back(static_cast<int>(j));
  return res;
}

void EvalAccumulator::add_frame(const std::vector<EvalBox>& preds,
                                const std::vector<GroundTruthObject>& gts,
                                const EvalConfig& config) {
  const FrameMatchResult res = match_frame(preds, gts, config, id_map_);

  tp += static_cast<std::int64_t>(res.tp.size());
  fp += static_cast<std::int64_t>(res.fp.size());
  fn += static_cast<std::int64_t>(res.fn.size());
  gt_total += static_cast<std::int64_t>(gts.size());

  for (const auto& g : gts) ++per_gt[g.instance_id].frames_present;

  for (const auto& [p, g, dist] : res.tp) {
    matched_distance_sum += dist;
    GtRecord& rec = per_gt[gts[static_cast<std::size_t>(g)].instance_id];
    const std::int64_t track = preds[static_cast<std::size_t>(p)].id;
    if (rec.last_track_id != -1 && rec.last_track_id != track) ++ids;
    if (rec.gap_open) {
      ++frag;
      rec.gap_open = false;
    }
    rec.last_track_id = track;
    ++rec.frames_tracked;
  }
  for (int g : res.fn) {
    GtRecord& rec = per_gt[gts[static_cast<std::size_t>(g)].instance_id];
    if (rec.last_track_id != -1) rec.gap_open = true;
  }
}

ClearMotResult compute_clearmot(const std::vector<EvalAccumulator>& per_sequence) {
  ClearMotResult out;
  for (const auto& acc : per_sequence) {
    out.tp += acc.tp;
    out.fp += acc.fp;
    out.fn += acc.fn;
    out.ids += acc.ids;
    out.frag += acc.frag;
    out.gt_total += acc.gt_total;
    for (const auto& [inst, rec] : acc.per_gt) {
      (void)inst;
      if (rec.frames_present == 0) continue;
      ++out.gt_tracks;
      const double coverage = static_cast<double>(rec.frames_tracked) / rec.frames_present;
      if (coverage >= 0.8)
        ++out.mt;
      else if (coverage <= 0.2)
        ++out.ml;
      else
        ++out.pt;
    }
  }
  if (out.gt_total > 0)
    out.mota = 1.0 - static_cast<double>(out.fn + out.fp + out.ids) / static_cast<double>(out.gt_total);
  double dist = 0.0;
  for (const auto& acc : per_sequence) dist += acc.matched_distance_sum;
  if (out.tp > 0) out.motp = dist / static_cast<double>(out.tp);
  return out;
}

ClearMotResult compute_clearmot(const EvalAccumulator& acc) {
  return compute_clearmot(std::vector<EvalAccumulator>{acc});
}

namespace {

struct SweepEval {
  std::int64_t tp = 0, fp = 0, fn = 0, ids = 0;
  double dist_sum = 0.0;
};

SweepEval evaluate_at_threshold(const std::vector<EvalSequence>& sequences, double threshold,
                                const EvalConfig& config) {
  SweepEval ev;
  for (const auto& seq : sequences) {
    EvalAccumulator acc;
    for (const auto& frame : seq) {
      std::vector<EvalBox> kept;
      for (const auto& p : frame.preds)
        if (p.score >= threshold) kept.push_back(p);
      acc.add_frame(kept, frame.gts, config);
    }
    ev.tp += acc.tp;
    ev.fp += acc.fp;
    ev.fn += acc.fn;
    ev.ids += acc.ids;
    ev.dist_sum += acc.matched_distance_sum;
  }
  return ev;
}

AmotaResult sweep_class_blind(const std::vector<EvalSequence>& sequences,
                              const EvalConfig& config) {
  AmotaResult out;
  std::int64_t gt_total = 0;
  for (const auto& seq : sequences)
    for (const auto& frame : seq) gt_total += static_cast<std::int64_t>(frame.gts.size());
  if (gt_total == 0) {
    out.diagnostic = "no ground truth objects";
    return out;
  }

  // Phase 1: a single score-ranked greedy pass estimates the recall curve,
  // fixing one confidence threshold per reachable recall target.
  struct Ranked {
    double score;
    std::size_t seq, frame, idx;
  };
  std::vector<Ranked> ranked;
  for (std::size_t s = 0; s < sequences.size(); ++s)
    for (std::size_t f = 0; f < sequences[s].size(); ++f)
      for (std::size_t i = 0; i < sequences[s][f].preds.size(); ++i)
        ranked.push_back({sequences[s][f].preds[i].score, s, f, i});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<std::vector<char>>> used(sequences.size());
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    used[s].resize(sequences[s].size());
    for (std::size_t f = 0; f < sequences[s].size(); ++f)
      used[s][f].assign(sequences[s][f].gts.size(), 0);
  }
  std::vector<double> cum_recall(ranked.size(), 0.0);
  std::int64_t tp_cum = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const auto& r = ranked[k];
    const auto& frame = sequences[r.seq][r.frame];
    const auto& pred = frame.preds[r.idx];
    double best = std::numeric_limits<double>::infinity();
    int best_gt = -1;
    for (std::size_t j = 0; j < frame.gts.size(); ++j) {
      if (used[r.seq][r.frame][j]) continue;
      const double d = geom::bev_center_distance(pred.box, frame.gts[j].box);
      if (d <= config.match_distance && d < best) {
        best = d;
        best_gt = static_cast<int>(j);
      }
    }
    if (best_gt >= 0) {
      used[r.seq][r.frame][static_cast<std::size_t>(best_gt)] = 1;
      ++tp_cum;
    }
    cum_recall[k] = static_cast<double>(tp_cum) / static_cast<double>(gt_total);
  }

  // Phase 2: full CLEAR accumulation at each selected threshold.
  std::map<double, SweepEval, std::greater<double>> evals;
  int skipped = 0;
  for (int i = 1; i <= config.recall_steps; ++i) {
    const double target = static_cast<double>(i) / config.recall_steps;
    const auto it = std::lower_bound(cum_recall.begin(), cum_recall.end(), target);
    if (it == cum_recall.end()) {
      ++skipped;
      continue;
    }
    const double threshold = ranked[static_cast<std::size_t>(it - cum_recall.begin())].score;
    auto [ev_it, fresh] = evals.try_emplace(threshold);
    if (fresh) ev_it->second = evaluate_at_threshold(sequences, threshold, config);
    const SweepEval& ev = ev_it->second;
    if (ev.tp == 0) {
      ++skipped;
      continue;
    }
    RecallPoint pt;
    pt.target = target;
    pt.achieved = static_cast<double>(ev.tp) / static_cast<double>(gt_total);
    pt.threshold = threshold;
    // At the achieved recall, FN - (1-r)GT vanishes: MOTAR reduces exactly to
    // 1 - (FP+IDS)/TP.
    pt.motar = clamp01(1.0 - static_cast<double>(ev.fp + ev.ids) / static_cast<double>(ev.tp));
    pt.motp = ev.dist_sum / static_cast<double>(ev.tp);
    pt.tp = ev.tp;
    pt.fp = ev.fp;
    pt.fn = ev.fn;
    pt.ids = ev.ids;
    out.points.push_back(pt);
  }

  if (out.points.empty()) {
    out.diagnostic = "no achievable recall points";
    return out;
  }
  double sa = 0.0, sp = 0.0;
  for (const auto& pt : out.points) {
    sa += pt.motar;
    sp += pt.motp;
  }
  out.amota = sa / static_cast<double>(out.points.size());
  out.amotp = sp / static_cast<double>(out.points.size());
  if (skipped > 0)
    out.diagnostic = std::to_string(skipped) + " recall targets unreachable, skipped";
  return out;
}

}  // namespace

AmotaResult compute_amota_amotp(const std::vector<EvalSequence>& sequences,
                                const EvalConfig& config) {
  config.validate();
  if (!config.per_class) return sweep_class_blind(sequences, config);

  std::map<int, std::vector<EvalSequence>> by_class;
  for (const auto& seq : sequences)
    for (const auto& frame : seq)
      for (const auto& g : frame.gts) by_class[g.class_id];  // classes with gt
  for (auto& [cls, filtered] : by_class) {
    filtered.reserve(sequences.size());
    for (const auto& seq : sequences) {
      EvalSequence fs;
      fs.reserve(seq.size());
      for (const auto& frame : seq) {
        EvalFrame ff;
        for (const auto& p : frame.preds)
          if (p.class_id == cls) ff.preds.push_back(p);
        for (const auto& g : frame.gts)
          if (g.class_id == cls) ff.gts.push_back(g);
        fs.push_back(std::move(ff));
      }
      filtered.push_back(std::move(fs));
    }
  }

  AmotaResult out;
  if (by_class.empty()) {
    out.diagnostic = "no ground truth objects";
    return out;
  }
  EvalConfig sub = config;
  sub.per_class = false;
  double sa = 0.0, sp = 0.0;
  int np = 0;
  for (const auto& [cls, filtered] : by_class) {
    AmotaResult r = sweep_class_blind(filtered, sub);
    out.class_amota[cls] = r.amota.value_or(0.0);
    sa += out.class_amota[cls];
    if (r.amotp.has_value()) {
      out.class_amotp[cls] = *r.amotp;
      sp += *r.amotp;
      ++np;
    }
  }
  out.amota = sa / static_cast<double>(by_class.size());
  if (np > 0) out.amotp = sp / static_cast<double>(np);
  return out;
}

MapResult compute_map_center_distance(const std::vector<EvalFrame>& frames,
                                      const std::vector<double>& thresholds) {
  if (thresholds.empty())
    throw ValidationError("compute_map_center_distance: thresholds must not be empty");

  std::map<int, std::int64_t> gt_counts;
  for (const auto& frame : frames)
    for (const auto& g : frame.gts) {
      if (g.is_null)
        throw ValidationError("compute_map_center_distance: null ground truth not allowed");
      ++gt_counts[g.class_id];
    }

  MapResult out;
  if (gt_counts.empty()) return out;

  struct Ranked {
    double score;
    std::size_t frame, idx;
  };
  double ap_sum = 0.0;
  std::size_t combos = 0;
  for (const auto& [cls, n_gt] : gt_counts) {
    std::vector<Ranked> ranked;
    for (std::size_t f = 0; f < frames.size(); ++f)
      for (std::size_t i = 0; i < frames[f].preds.size(); ++i)
        if (frames[f].preds[i].class_id == cls) ranked.push_back({frames[f].preds[i].score, f, i});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

    for (double thr : thresholds) {
      std::vector<std::vector<char>> used(frames.size());
      for (std::size_t f = 0; f < frames.size(); ++f) used[f].assign(frames[f].gts.size(), 0);

      std::vector<char> is_tp(ranked.size(), 0);
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        const auto& r = ranked[k];
        const auto& frame = frames[r.frame];
        double best = std::numeric_limits<double>::infinity();
        int best_gt = -1;
        for (std::size_t j = 0; j < frame.gts.size(); ++j) {
          if (used[r.frame][j] || frame.gts[j].class_id != cls) continue;
          const double d = geom::bev_center_distance(frame.preds[r.idx].box, frame.gts[j].box);
          if (d <= thr && d < best) {
            best = d;
            best_gt = static_cast<int>(j);
          }
        }
        if (best_gt >= 0) {
          used[r.frame][static_cast<std::size_t>(best_gt)] = 1;
          is_tp[k] = 1;
        }
      }

      // all-point AP: running max of precision from the right, one recall
      // step of 1/n_gt per true positive
      double ap = 0.0, env = 0.0;
      std::int64_t tp_cum = 0;
      std::vector<double> prec(ranked.size(), 0.0);
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        if (is_tp[k]) ++tp_cum;
        prec[k] = static_cast<double>(tp_cum) / static_cast<double>(k + 1);
      }
      for (std::size_t k = ranked.size(); k-- > 0;) {
        env = std::max(env, prec[k]);
        if (is_tp[k]) ap += env;
      }
      ap /= static_cast<double>(n_gt);

      out.entries.push_back({cls, thr, ap, n_gt});
      ap_sum += ap;
      ++combos;
    }
  }
  out.map = ap_sum / static_cast<double>(combos);
  return out;
}

}  // namespace lmot::metrics
