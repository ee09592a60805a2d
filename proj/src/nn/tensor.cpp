// SPDX-License-Identifier: Apache-2.0
#include "lmot/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lmot/common.hpp"

namespace lmot::nn {

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                          shape_str(b));
}

bool row_broadcastable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return b.rows() == 1 && a.cols() == b.cols();
}

std::shared_ptr<Node> make_node(Eigen::MatrixXd value, std::vector<Tensor> parents,
                                std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& p : parents)
    if (p.node()->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(back);
  }
  return n;
}

void accumulate(Node& parent, const Eigen::MatrixXd& g) {
  if (!parent.requires_grad) return;
  if (parent.grad.size() == 0)
    parent.grad = Eigen::MatrixXd::Zero(parent.value.rows(), parent.value.cols());
  parent.grad += g;
}

}  // namespace

Tensor Tensor::constant(Eigen::MatrixXd v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Tensor Tensor::param(Eigen::MatrixXd v, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

const Eigen::MatrixXd& Tensor::value() const {
  if (!node_) throw ValidationError("Tensor: undefined handle");
  return node_->value;
}

Eigen::MatrixXd& Tensor::mutable_value() {
  if (!node_) throw ValidationError("Tensor: undefined handle");
  return node_->value;
}

const Eigen::MatrixXd& Tensor::grad() const {
  if (!node_) throw ValidationError("Tensor: undefined handle");
  if (node_->grad.size() == 0)
    node_->grad = Eigen::MatrixXd::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

const std::string& Tensor::name() const {
  if (!node_) throw ValidationError("Tensor: undefined handle");
  return node_->name;
}

void Tensor::backward() const {
  if (!node_) throw ValidationError("backward: undefined tensor");
  if (node_->value.size() != 1) throw ValidationError("backward: root must be 1x1");
  if (!node_->requires_grad) return;

  // Iterative post-order topological sort over the requires_grad subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  if (node_->grad.size() == 0) node_->grad = Eigen::MatrixXd::Zero(1, 1);
  node_->grad(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) {
      if (n->grad.size() == 0) n->grad = Eigen::MatrixXd::Zero(n->value.rows(), n->value.cols());
      n->backward_fn(*n);
    }
  }
}

void Tensor::zero_grad() const {
  if (node_) node_->grad.resize(0, 0);
}

Tensor Tensor::detach() const { return constant(value()); }

double Tensor::item() const {
  if (value().size() != 1) throw ValidationError("item: tensor is not 1x1");
  return value()(0, 0);
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return Tensor(make_node(av + bv, {a, b}, [a = a.node(), b = b.node()](Node& n) {
      accumulate(*a, n.grad);
      accumulate(*b, n.grad);
    }));
  }
  if (row_broadcastable(av, bv)) {
    Eigen::MatrixXd out = av.rowwise() + bv.row(0);
    return Tensor(make_node(std::move(out), {a, b}, [a = a.node(), b = b.node()](Node& n) {
      accumulate(*a, n.grad);
      accumulate(*b, n.grad.colwise().sum());
    }));
  }
  throw ValidationError("add: shape mismatch " + shape_str(av) + " vs " + shape_str(bv));
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    return Tensor(
        make_node(av.cwiseProduct(bv), {a, b}, [a = a.node(), b = b.node()](Node& n) {
          accumulate(*a, n.grad.cwiseProduct(b->value));
          accumulate(*b, n.grad.cwiseProduct(a->value));
        }));
  }
  if (row_broadcastable(av, bv)) {
    Eigen::MatrixXd out = av.array().rowwise() * bv.row(0).array();
    return Tensor(make_node(std::move(out), {a, b}, [a = a.node(), b = b.node()](Node& n) {
      accumulate(*a, n.grad.array().rowwise() * b->value.row(0).array());
      accumulate(*b, n.grad.cwiseProduct(a->value).colwise().sum());
    }));
  }
  throw ValidationError("mul: shape mismatch " + shape_str(av) + " vs " + shape_str(bv));
}

Tensor scale(const Tensor& a, double s) {
  return Tensor(make_node(a.value() * s, {a}, [a = a.node(), s](Node& n) {
    accumulate(*a, n.grad * s);
  }));
}

Tensor add_scalar(const Tensor& a, double s) {
  return Tensor(make_node(a.value().array() + s, {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad);
  }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows())
    throw ValidationError("matmul: inner dimension mismatch " + shape_str(av) + " vs " +
                          shape_str(bv));
  return Tensor(make_node(av * bv, {a, b}, [a = a.node(), b = b.node()](Node& n) {
    accumulate(*a, n.grad * b->value.transpose());
    accumulate(*b, a->value.transpose() * n.grad);
  }));
}

Tensor transpose(const Tensor& a) {
  return Tensor(make_node(a.value().transpose(), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.transpose());
  }));
}

Tensor relu(const Tensor& a) {
  return Tensor(make_node(a.value().cwiseMax(0.0), {a}, [a = a.node()](Node& n) {
    accumulate(*a, (a->value.array() > 0.0).select(n.grad, 0.0));
  }));
}

Tensor sigmoid(const Tensor& a) {
  Eigen::MatrixXd y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return Tensor(make_node(std::move(y), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.array() * n.value.array() * (1.0 - n.value.array()));
  }));
}

Tensor tanh_t(const Tensor& a) {
  Eigen::MatrixXd y = a.value().array().tanh();
  return Tensor(make_node(std::move(y), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.array() * (1.0 - n.value.array().square()));
  }));
}

Tensor exp_t(const Tensor& a) {
  Eigen::MatrixXd y = a.value().array().exp();
  return Tensor(make_node(std::move(y), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.cwiseProduct(n.value));
  }));
}

Tensor log_t(const Tensor& a) {
  if ((a.value().array() <= 0.0).any())
    throw NumericError("log: non-positive input");
  return Tensor(make_node(a.value().array().log(), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.cwiseQuotient(a->value));
  }));
}

Tensor abs_t(const Tensor& a) {
  return Tensor(make_node(a.value().cwiseAbs(), {a}, [a = a.node()](Node& n) {
    Eigen::MatrixXd sign =
        (a->value.array() > 0.0).select(Eigen::MatrixXd::Ones(a->value.rows(), a->value.cols()),
                                        (a->value.array() < 0.0)
                                            .select(-Eigen::MatrixXd::Ones(a->value.rows(),
                                                                           a->value.cols()),
                                                    0.0));
    accumulate(*a, n.grad.cwiseProduct(sign));
  }));
}

Tensor sin_t(const Tensor& a) {
  return Tensor(make_node(a.value().array().sin(), {a}, [a = a.node()](Node& n) {
    accumulate(*a, n.grad.cwiseProduct(a->value.array().cos().matrix()));
  }));
}

Tensor cos_t(const Tensor& a) {
  return Tensor(make_node(a.value().array().cos(), {a}, [a = a.node()](Node& n) {
    accumulate(*a, -n.grad.cwiseProduct(a->value.array().sin().matrix()));
  }));
}

Tensor div(const Tensor& a, const Tensor& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw ValidationError("div: shape mismatch " + shape_str(av) + " vs " + shape_str(bv));
  if ((bv.array() == 0.0).any()) throw NumericError("div: zero divisor");
  return Tensor(make_node(av.cwiseQuotient(bv), {a, b}, [a = a.node(), b = b.node()](Node& n) {
    accumulate(*a, n.grad.cwiseQuotient(b->value));
    accumulate(*b, -n.grad.cwiseProduct(n.value).cwiseQuotient(b->value));
  }));
}

Tensor clamp_t(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw ValidationError("clamp: lo must not exceed hi");
  Eigen::MatrixXd y = a.value().array().max(lo).min(hi);
  return Tensor(make_node(std::move(y), {a}, [a = a.node(), lo, hi](Node& n) {
    const auto inside =
        (a->value.array() >= lo && a->value.array() <= hi).cast<double>();
    accumulate(*a, n.grad.cwiseProduct(inside.matrix()));
  }));
}

Tensor pow_scalar(const Tensor& a, double e) {
  if (e != std::floor(e) && (a.value().array() < 0.0).any())
    throw NumericError("pow: negative base with fractional exponent");
  return Tensor(make_node(a.value().array().pow(e), {a}, [a = a.node(), e](Node& n) {
    accumulate(*a, n.grad.array() * e * a->value.array().pow(e - 1.0));
  }));
}

Tensor atan2_t(const Tensor& y, const Tensor& x) {
  const auto& yv = y.value();
  const auto& xv = x.value();
  require_same_shape(yv, xv, "atan2");
  Eigen::MatrixXd out = yv.binaryExpr(xv, [](double a, double b) { return std::atan2(a, b); });
  return Tensor(make_node(std::move(out), {y, x}, [y = y.node(), x = x.node()](Node& n) {
    Eigen::ArrayXXd denom = y->value.array().square() + x->value.array().square();
    accumulate(*y, (n.grad.array() * x->value.array() / denom).matrix());
    accumulate(*x, (-n.grad.array() * y->value.array() / denom).matrix());
  }));
}

Tensor softmax_rows(const Tensor& a) {
  const auto& av = a.value();
  if (av.cols() == 0) throw ValidationError("softmax: empty rows");
  Eigen::MatrixXd y(av.rows(), av.cols());
  for (Eigen::Index i = 0; i < av.rows(); ++i) {
    Eigen::ArrayXd row = av.row(i).array();
    Eigen::ArrayXd e = (row - row.maxCoeff()).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return Tensor(make_node(std::move(y), {a}, [a = a.node()](Node& n) {
    Eigen::MatrixXd dx(n.value.rows(), n.value.cols());
    for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
      const double dot = n.grad.row(i).dot(n.value.row(i));
      dx.row(i) = (n.value.row(i).array() * (n.grad.row(i).array() - dot)).matrix();
    }
    accumulate(*a, dx);
  }));
}

Tensor sum_all(const Tensor& a) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = a.value().sum();
  return Tensor(make_node(std::move(out), {a}, [a = a.node()](Node& n) {
    accumulate(*a, Eigen::MatrixXd::Constant(a->value.rows(), a->value.cols(), n.grad(0, 0)));
  }));
}

Tensor mean_all(const Tensor& a) {
  if (a.value().size() == 0) throw ValidationError("mean: empty tensor");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no parts");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  auto n = make_node(std::move(out), parts, [parents = parts](Node& n) {
    Eigen::Index at2 = 0;
    for (const auto& p : parents) {
      accumulate(*p.node(), n.grad.middleRows(at2, p.node()->value.rows()));
      at2 += p.node()->value.rows();
    }
  });
  return Tensor(std::move(n));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no parts");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  auto n = make_node(std::move(out), parts, [parents = parts](Node& n) {
    Eigen::Index at2 = 0;
    for (const auto& p : parents) {
      accumulate(*p.node(), n.grad.middleCols(at2, p.node()->value.cols()));
      at2 += p.node()->value.cols();
    }
  });
  return Tensor(std::move(n));
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  const auto& av = a.value();
  if (start < 0 || count < 0 || start + count > av.rows())
    throw ValidationError("slice_rows: range outside tensor");
  return Tensor(make_node(av.middleRows(start, count), {a}, [a = a.node(), start,
                                                             count](Node& n) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a->value.rows(), a->value.cols());
    g.middleRows(start, count) = n.grad;
    accumulate(*a, g);
  }));
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  const auto& av = a.value();
  if (start < 0 || count < 0 || start + count > av.cols())
    throw ValidationError("slice_cols: range outside tensor");
  return Tensor(make_node(av.middleCols(start, count), {a}, [a = a.node(), start,
                                                             count](Node& n) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a->value.rows(), a->value.cols());
    g.middleCols(start, count) = n.grad;
    accumulate(*a, g);
  }));
}

Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& indices) {
  const auto& av = a.value();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), av.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= av.rows())
      throw ValidationError("gather_rows: index outside tensor");
    out.row(static_cast<Eigen::Index>(i)) = av.row(indices[i]);
  }
  return Tensor(make_node(std::move(out), {a}, [a = a.node(), indices](Node& n) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a->value.rows(), a->value.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
      g.row(indices[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    accumulate(*a, g);
  }));
}

Tensor col_max(const Tensor& a) {
  const auto& av = a.value();
  if (av.rows() == 0) throw ValidationError("col_max: empty tensor");
  Eigen::MatrixXd out(1, av.cols());
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(av.cols()));
  for (Eigen::Index c = 0; c < av.cols(); ++c) {
    Eigen::Index r;
    out(0, c) = av.col(c).maxCoeff(&r);
    arg[static_cast<std::size_t>(c)] = r;
  }
  return Tensor(make_node(std::move(out), {a}, [a = a.node(), arg](Node& n) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a->value.rows(), a->value.cols());
    for (Eigen::Index c = 0; c < a->value.cols(); ++c)
      g(arg[static_cast<std::size_t>(c)], c) = n.grad(0, c);
    accumulate(*a, g);
  }));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const auto& xv = x.value();
  const Eigen::Index d = xv.cols();
  if (d < 1) throw ValidationError("layer_norm: empty rows");
  if (gain.value().rows() != 1 || gain.value().cols() != d || bias.value().rows() != 1 ||
      bias.value().cols() != d)
    throw ValidationError("layer_norm: gain/bias must be 1x" + std::to_string(d));

  Eigen::VectorXd mu(xv.rows()), inv_sd(xv.rows());
  Eigen::MatrixXd xhat(xv.rows(), d);
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double m = xv.row(i).mean();
    const double var = (xv.row(i).array() - m).square().mean();
    mu(i) = m;
    inv_sd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - m) * inv_sd(i);
  }
  Eigen::MatrixXd y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                      bias.value().row(0).array();
  auto xh = std::make_shared<Eigen::MatrixXd>(std::move(xhat));
  auto isd = std::make_shared<Eigen::VectorXd>(std::move(inv_sd));
  return Tensor(make_node(std::move(y), {x, gain, bias},
                          [x = x.node(), g = gain.node(), b = bias.node(), xh, isd](Node& n) {
    const Eigen::Index d2 = n.value.cols();
    accumulate(*b, n.grad.colwise().sum());
    accumulate(*g, n.grad.cwiseProduct(*xh).colwise().sum());
    Eigen::MatrixXd dxhat = n.grad.array().rowwise() * g->value.row(0).array();
    Eigen::MatrixXd dx(n.value.rows(), d2);
    for (Eigen::Index i = 0; i < n.value.rows(); ++i) {
      const double mean_d = dxhat.row(i).mean();
      const double mean_dx = dxhat.row(i).cwiseProduct(xh->row(i)).mean();
      dx.row(i) =
          ((dxhat.row(i).array() - mean_d - xh->row(i).array() * mean_dx) * (*isd)(i)).matrix();
    }
    accumulate(*x, dx);
  }));
}

}  // namespace lmot::nn
