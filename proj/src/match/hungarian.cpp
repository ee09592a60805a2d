// SPDX-License-Identifier: Apache-2.0
#include "lmot/match/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lmot/common.hpp"

namespace lmot::match {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path assignment on an n x n matrix. Returns the
// matched column per row and leaves optimal dual potentials in u, v, so
// that every optimal assignment runs inside the tight subgraph
// { (i,j) : cost(i,j) - u[i] - v[j] = 0 }.
std::vector<int> solve_square(const Eigen::MatrixXd& a, std::vector<double>& u,
                              std::vector<double>& v) {
  const int n = static_cast<int>(a.rows());
  u.assign(static_cast<std::size_t>(n) + 1, 0.0);
  v.assign(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> match_col(static_cast<std::size_t>(n) + 1, 0);  // 1-based; col -> row
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match_col[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      int i0 = match_col[static_cast<std::size_t>(j0)], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = a(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                     v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match_col[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      match_col[static_cast<std::size_t>(j0)] = match_col[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    row_to_col[static_cast<std::size_t>(match_col[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

// Single Kuhn augmentation from `row` over the adjacency `adj`, skipping
// rows below `frozen_before` (their columns are already pinned).
bool augment(int row, const std::vector<std::vector<int>>& adj, std::vector<int>& match_row,
             std::vector<int>& match_col, std::vector<char>& visited, int frozen_before) {
  for (int c : adj[static_cast<std::size_t>(row)]) {
    if (visited[static_cast<std::size_t>(c)]) continue;
    visited[static_cast<std::size_t>(c)] = 1;
    int owner = match_col[static_cast<std::size_t>(c)];
    if (owner < 0 || (owner >= frozen_before &&
                      augment(owner, adj, match_row, match_col, visited, frozen_before))) {
      match_row[static_cast<std::size_t>(row)] = c;
      match_col[static_cast<std::size_t>(c)] = row;
      return true;
    }
  }
  return false;
}

}  // namespace

int Assignment::col_of(int row) const {
  for (const auto& [r, c] : pairs)
    if (r == row) return c;
  return -1;
}

Assignment hungarian_assign(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  Assignment out;
  if (rows == 0 || cols == 0) return out;
  if (!cost.allFinite()) throw ValidationError("hungarian_assign: non-finite cost entry");

  // Pad to square with zero-cost dummy rows/columns; dummies sit at the high
  // indices so the lexicographic pass settles real pairs first.
  const int n = std::max(rows, cols);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(n, n);
  sq.topLeftCorner(rows, cols) = cost;

  std::vector<double> u, v;
  std::vector<int> match_row = solve_square(sq, u, v);

  // Tight subgraph: edges with zero reduced cost under the optimal duals.
  // The tolerance sits well above dual-update rounding noise but far below
  // any gap between genuinely distinct assignment totals.
  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double eps = 1e-12 * scale;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(sq(i, j) - u[static_cast<std::size_t>(i + 1)] -
                   v[static_cast<std::size_t>(j + 1)]) <= eps)
        adj[static_cast<std::size_t>(i)].push_back(j);

  std::vector<int> match_col(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) match_col[static_cast<std::size_t>(match_row[static_cast<std::size_t>(i)])] = i;

  // Lexicographic pass: fix each row in turn to its smallest tight column
  // that still admits a perfect matching on the remaining rows.
  for (int i = 0; i < n; ++i) {
    const int current = match_row[static_cast<std::size_t>(i)];
    for (int c : adj[static_cast<std::size_t>(i)]) {
      if (c == current) break;  // already the best reachable column
      const int owner = match_col[static_cast<std::size_t>(c)];
      if (owner >= 0 && owner < i) continue;  // pinned by an earlier row
      // Tentatively move row i to column c and re-seat the displaced row.
      match_row[static_cast<std::size_t>(i)] = c;
      match_col[static_cast<std::size_t>(c)] = i;
      match_col[static_cast<std::size_t>(current)] = -1;
      bool ok = true;
      if (owner >= 0) {
        match_row[static_cast<std::size_t>(owner)] = -1;
        std::vector<char> visited(static_cast<std::size_t>(n), 0);
        visited[static_cast<std::size_t>(c)] = 1;  // column c is taken by row i
        ok = augment(owner, adj, match_row, match_col, visited, i + 1);
      }
      if (ok) break;
      // Roll back.
      if (owner >= 0) {
        match_row[static_cast<std::size_t>(owner)] = c;
      }
      match_col[static_cast<std::size_t>(c)] = owner;
      match_row[static_cast<std::size_t>(i)] = current;
      match_col[static_cast<std::size_t>(current)] = i;
    }
  }

  for (int i = 0; i < rows; ++i) {
    const int c = match_row[static_cast<std::size_t>(i)];
    if (c < cols) {
      out.pairs.emplace_back(i, c);
      out.total_cost += cost(i, c);
    }
  }
  return out;
}

}  // namespace lmot::match
