// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace lmot::match {

// One-to-one matching between rows (predictions) and columns (ground truth).
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // sorted by row index
  double total_cost = 0.0;

  // column matched to `row`, or -1
  int col_of(int row) const;
};

// Minimum-total-cost assignment covering min(rows, cols) pairs. Among all
// optimal assignments, returns the one whose (row, col) pair sequence is
// lexicographically smallest. Empty matrix yields an empty assignment;
// non-finite entries throw ValidationError.
Assignment hungarian_assign(const Eigen::MatrixXd& cost);

}  // namespace lmot::match
