// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace lmot::nn {

// One vertex of the reverse-mode graph. Values and gradients are dense 2-D
// double buffers; vectors travel as 1xD rows.
struct Node {
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;  // sized lazily during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(Node&)> backward_fn;
  std::string name;  // set for parameters; used in diagnostics
};

// Value-semantics handle onto a graph node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Eigen::MatrixXd v);
  static Tensor scalar(double v);
  static Tensor param(Eigen::MatrixXd v, std::string name);

  bool defined() const { return static_cast<bool>(node_); }
  const Eigen::MatrixXd& value() const;
  Eigen::MatrixXd& mutable_value();  // parameters only: optimizer updates
  const Eigen::MatrixXd& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string& name() const;

  // Runs reverse-mode accumulation from this (1x1) node. Gradients add into
  // any previously accumulated values; call zero_grad between steps.
  void backward() const;
  void zero_grad() const;

  // Same value, cut off from the graph.
  Tensor detach() const;

  double item() const;  // 1x1 convenience

  std::shared_ptr<Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

// ---- primitive ops (all differentiable unless stated) ----

Tensor add(const Tensor& a, const Tensor& b);  // same shape, or b is 1xD row
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same broadcast as add
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);  // input must be strictly positive
Tensor abs_t(const Tensor& a);  // subgradient 0 at 0
Tensor sin_t(const Tensor& a);
Tensor cos_t(const Tensor& a);
Tensor div(const Tensor& a, const Tensor& b);  // elementwise, same shape, b nonzero
// Values squeezed into [lo, hi]; gradient passes only where the input
// already lies inside the interval.
Tensor clamp_t(const Tensor& a, double lo, double hi);
Tensor pow_scalar(const Tensor& a, double e);
Tensor atan2_t(const Tensor& y, const Tensor& x);  // elementwise

// Row-wise softmax, numerically stabilized. Combine with an additive mask
// (large negative constants) before calling to exclude padding keys.
Tensor softmax_rows(const Tensor& a);

Tensor sum_all(const Tensor& a);   // 1x1
Tensor mean_all(const Tensor& a);  // 1x1

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
// Rebuilds a matrix from selected rows; indices may repeat (grads accumulate).
Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& indices);
// Column-wise max over all rows -> 1xD; gradient routes to the first argmax.
Tensor col_max(const Tensor& a);

// Per-row standardization (eps inside the sqrt) followed by gain/bias, both
// 1xD rows. Fused forward/backward.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Additive attention mask value for excluded positions.
inline constexpr double kMaskValue = -1e30;

}  // namespace lmot::nn
