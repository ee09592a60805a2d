// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <vector>

#include "lmot/core/types.hpp"

namespace lmot::match {

// Weighting of the matching cost / loss terms.
struct MatchWeights {
  double w_bbox = 0.5;
  double w_cls = 1.0;
  bool include_giou = false;
  double giou_weight = 1.0;  // multiplier on the (otherwise unweighted) giou term
  double focal_alpha = 0.5;
  double focal_gamma = 2.0;

  void validate() const;

  static MatchWeights smoother_defaults();  // 0.5 / 1.0, alpha 0.5, no giou
  static MatchWeights tracker_defaults();   // 0.25 / 2.0, alpha 0.25, with giou
};

// Probability floor keeping log() finite in the focal terms.
inline constexpr double kProbClamp = 1e-7;

// Focal loss of a single probability. positive: -alpha*(1-p)^gamma*log(p);
// negative: -(1-alpha)*p^gamma*log(1-p). p is clamped into
// [kProbClamp, 1-kProbClamp]; values outside [0,1] are rejected.
double focal_loss(double p, bool positive, double alpha, double gamma);

// Mean absolute error over (x,y,z,w,l,h,yaw); the yaw difference is wrapped
// into (-pi, pi] before taking its magnitude.
double l1_box_loss(const BBox3D& pred, const BBox3D& gt);

// 1 - GIoU of the axis-aligned hulls, in [0, 2).
double giou_loss(const BBox3D& pred, const BBox3D& gt);

// Prediction side of the matching: a box with a confidence and either a hard
// class label or a full class distribution (as produced by the model heads).
struct MatchCandidate {
  BBox3D box;
  double score = 1.0;
  int class_id = -1;
  std::vector<double> class_probs;  // empty -> hard label via class_id

  // Predicted probability of `cls`: score * class_probs[cls] when a
  // distribution is present, otherwise score for the labelled class and 0
  // for every other one.
  double prob_of(int cls) const;

  static MatchCandidate from_detection(const Detection& d);
};

// cost[i][j] of assigning candidate i to gt j (Eq. 2 / Eq. 4 style):
// real gt:  w_bbox * l1 + w_cls * focal_pos(prob of gt class) [+ giou]
// null gt:  w_cls * focal_neg(score), no box terms.
Eigen::MatrixXd match_cost_matrix(const std::vector<MatchCandidate>& preds,
                                  const std::vector<GroundTruthObject>& gts,
                                  const MatchWeights& w, std::size_t n_classes);

// Appends null objects until the list has target_len entries.
std::vector<GroundTruthObject> pad_ground_truth(std::vector<GroundTruthObject> gts,
                                                std::size_t target_len);

}  // namespace lmot::match
