// SPDX-License-Identifier: Apache-2.0
#include "lmot/nn/layers.hpp"

#include <cmath>

#include "lmot/common.hpp"

namespace lmot::nn {

void AttentionConfig::validate() const {
  if (model_dim < 8) throw ValidationError("AttentionConfig: model_dim must be >= 8");
  if (heads < 1 || model_dim % heads != 0)
    throw ValidationError("AttentionConfig: model_dim must divide evenly into heads");
}

ParameterStore::ParameterStore(std::uint64_t seed) : rng_(seed) {}

Tensor ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                              Init init) {
  if (contains(name)) throw ValidationError("ParameterStore: duplicate parameter '" + name + "'");
  Eigen::MatrixXd v(rows, cols);
  switch (init) {
    case Init::kZeros:
      v.setZero();
      break;
    case Init::kOnes:
      v.setOnes();
      break;
    case Init::kXavier: {
      const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) v(i, j) = u(rng_);
      break;
    }
  }
  Tensor t = Tensor::param(std::move(v), name);
  params_.push_back(t);
  return t;
}

Tensor ParameterStore::at(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name() == name) return p;
  throw ValidationError("ParameterStore: unknown parameter '" + name + "'");
}

bool ParameterStore::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name() == name) return true;
  return false;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::size_t ParameterStore::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (x.cols() != W.rows())
    throw ValidationError("linear: input " + std::to_string(x.rows()) + "x" +
                          std::to_string(x.cols()) + " does not match weight " +
                          std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  if (b.rows() != 1 || b.cols() != W.cols())
    throw ValidationError("linear: bias " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + " does not match weight " +
                          std::to_string(W.rows()) + "x" + std::to_string(W.cols()));
  return add(matmul(x, W), b);
}

Linear::Linear(ParameterStore& ps, const std::string& prefix, Eigen::Index in, Eigen::Index out)
    : W(ps.create(prefix + ".W", in, out)), b(ps.create(prefix + ".b", 1, out, Init::kZeros)) {}

LayerNorm::LayerNorm(ParameterStore& ps, const std::string& prefix, Eigen::Index d)
    : gain(ps.create(prefix + ".gain", 1, d, Init::kOnes)),
      bias(ps.create(prefix + ".bias", 1, d, Init::kZeros)) {}

FFN::FFN(ParameterStore& ps, const std::string& prefix, Eigen::Index in, Eigen::Index hidden,
         Eigen::Index out)
    : fc1(ps, prefix + ".fc1", in, hidden), fc2(ps, prefix + ".fc2", hidden, out) {}

MultiHeadAttention::MultiHeadAttention(ParameterStore& ps, const std::string& prefix,
                                       AttentionConfig c)
    : cfg(c),
      wq(ps, prefix + ".wq", c.model_dim, c.model_dim),
      wk(ps, prefix + ".wk", c.model_dim, c.model_dim),
      wv(ps, prefix + ".wv", c.model_dim, c.model_dim),
      wo(ps, prefix + ".wo", c.model_dim, c.model_dim) {
  cfg.validate();
}

Tensor MultiHeadAttention::forward(const Tensor& q, const Tensor& k, const Tensor& v,
                                   const Eigen::MatrixXd* add_mask) const {
  if (k.rows() == 0) throw ValidationError("attention: empty key set");
  if (k.rows() != v.rows()) throw ValidationError("attention: key/value length mismatch");
  if (q.cols() != cfg.model_dim || k.cols() != cfg.model_dim || v.cols() != cfg.model_dim)
    throw ValidationError("attention: inputs must have model_dim columns");
  if (add_mask && (add_mask->rows() != q.rows() || add_mask->cols() != k.rows()))
    throw ValidationError("attention: mask shape mismatch");

  const Tensor Q = wq.forward(q);
  const Tensor K = wk.forward(k);
  const Tensor V = wv.forward(v);
  const int hd = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    Tensor qh = slice_cols(Q, h * hd, hd);
    Tensor kh = slice_cols(K, h * hd, hd);
    Tensor vh = slice_cols(V, h * hd, hd);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    if (add_mask) scores = add(scores, Tensor::constant(*add_mask));
    heads.push_back(matmul(softmax_rows(scores), vh));
  }
  return wo.forward(concat_cols(heads));
}

Embedding::Embedding(ParameterStore& ps, const std::string& name, Eigen::Index count,
                     Eigen::Index dim)
    : table(ps.create(name, count, dim)) {}

Eigen::MatrixXd sinusoidal_pe(const Eigen::MatrixXd& positions, int d, const SceneRange& range) {
  if (d % 6 != 0 || d <= 0)
    throw ValidationError("sinusoidal_pe: dim must be a positive multiple of 6, got " +
                          std::to_string(d));
  if (positions.cols() != 3) throw ValidationError("sinusoidal_pe: positions must be n x 3");
  const int pairs = d / 6;
  Eigen::MatrixXd out(positions.rows(), d);
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    int col = 0;
    for (int axis = 0; axis < 3; ++axis) {
      const double u = positions(i, axis) / range.span(axis);
      for (int p = 0; p < pairs; ++p) {
        const double theta = M_PI * std::ldexp(u, p);  // pi * 2^p * u
        out(i, col++) = std::sin(theta);
        out(i, col++) = std::cos(theta);
      }
    }
  }
  return out;
}

}  // namespace lmot::nn
