// SPDX-License-Identifier: Apache-2.0
#include "lmot/match/losses.hpp"

#include <algorithm>
#include <cmath>

#include "lmot/common.hpp"
#include "lmot/geom/geometry.hpp"

namespace lmot::match {

void MatchWeights::validate() const {
  if (w_bbox < 0.0 || w_cls < 0.0 || giou_weight < 0.0)
    throw ValidationError("MatchWeights: weights must be non-negative");
  if (!(focal_alpha > 0.0 && focal_alpha < 1.0))
    throw ValidationError("MatchWeights: focal_alpha must lie in (0,1)");
  if (focal_gamma < 0.0) throw ValidationError("MatchWeights: focal_gamma must be >= 0");
}

MatchWeights MatchWeights::smoother_defaults() {
  MatchWeights w;
  w.w_bbox = 0.5;
  w.w_cls = 1.0;
  w.include_giou = false;
  w.focal_alpha = 0.5;
  w.focal_gamma = 2.0;
  return w;
}

MatchWeights MatchWeights::tracker_defaults() {
  MatchWeights w;
  w.w_bbox = 0.25;
  w.w_cls = 2.0;
  w.include_giou = true;
  w.focal_alpha = 0.25;
  w.focal_gamma = 2.0;
  return w;
}

double focal_loss(double p, bool positive, double alpha, double gamma) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    throw ValidationError("focal_loss: probability outside [0,1]");
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  if (positive) return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
  return -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
}

double l1_box_loss(const BBox3D& pred, const BBox3D& gt) {
  pred.validate();
  gt.validate();
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) sum += std::abs(pred.center[a] - gt.center[a]);
  for (int a = 0; a < 3; ++a) sum += std::abs(pred.size[a] - gt.size[a]);
  sum += std::abs(normalize_yaw(pred.yaw - gt.yaw));
  return sum / 7.0;
}

double giou_loss(const BBox3D& pred, const BBox3D& gt) {
  return 1.0 - geom::giou_boxes(pred, gt);
}

double MatchCandidate::prob_of(int cls) const {
  if (!class_probs.empty()) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= class_probs.size())
      throw ValidationError("MatchCandidate: class index outside distribution");
    return score * class_probs[static_cast<std::size_t>(cls)];
  }
  return cls == class_id ? score : 0.0;
}

MatchCandidate MatchCandidate::from_detection(const Detection& d) {
  MatchCandidate c;
  c.box = d.box;
  c.score = d.score;
  c.class_id = d.class_id;
  return c;
}

Eigen::MatrixXd match_cost_matrix(const std::vector<MatchCandidate>& preds,
                                  const std::vector<GroundTruthObject>& gts,
                                  const MatchWeights& w, std::size_t n_classes) {
  w.validate();
  if (preds.empty()) throw ValidationError("match_cost_matrix: no predictions");
  for (const auto& p : preds) {
    if (p.class_probs.empty() &&
        (p.class_id < 0 || static_cast<std::size_t>(p.class_id) >= n_classes))
      throw ValidationError("match_cost_matrix: candidate class id outside class table");
    if (!p.class_probs.empty() && p.class_probs.size() != n_classes)
      throw ValidationError("match_cost_matrix: class distribution size mismatch");
  }
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(preds.size()),
                       static_cast<Eigen::Index>(gts.size()));
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const auto& g = gts[j];
    if (!g.is_null && (g.class_id < 0 || static_cast<std::size_t>(g.class_id) >= n_classes))
      throw ValidationError("match_cost_matrix: gt class id outside class table");
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto& p = preds[i];
      double c;
      if (g.is_null) {
        c = w.w_cls * focal_loss(p.score, false, w.focal_alpha, w.focal_gamma);
      } else {
        c = w.w_bbox * l1_box_loss(p.box, g.box) +
            w.w_cls * focal_loss(p.prob_of(g.class_id), true, w.focal_alpha, w.focal_gamma);
        if (w.include_giou) c += w.giou_weight * giou_loss(p.box, g.box);
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
    }
  }
  return cost;
}

std::vector<GroundTruthObject> pad_ground_truth(std::vector<GroundTruthObject> gts,
                                                std::size_t target_len) {
  if (target_len < gts.size())
    throw ValidationError("pad_ground_truth: target length below ground-truth count");
  gts.reserve(target_len);
  while (gts.size() < target_len) gts.push_back(GroundTruthObject::null_object());
  return gts;
}

}  // namespace lmot::match
