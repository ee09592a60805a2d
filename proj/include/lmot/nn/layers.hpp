// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lmot/core/types.hpp"
#include "lmot/nn/tensor.hpp"

namespace lmot::nn {

struct AttentionConfig {
  int model_dim = 64;
  int heads = 4;

  int head_dim() const { return model_dim / heads; }
  void validate() const;  // model_dim >= 8 and divisible by heads
};

enum class Init { kXavier, kZeros, kOnes };

// Owns every learnable tensor, keyed by name in creation order. Creation
// order also fixes the RNG draw order, so a given seed yields bit-identical
// initial weights.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0);

  Tensor create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                Init init = Init::kXavier);
  Tensor at(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<Tensor>& all() const { return params_; }
  void zero_grad();
  std::size_t coordinate_count() const;

 private:
  std::mt19937_64 rng_;
  std::vector<Tensor> params_;
};

// y = x W + b. Free-function form checks shapes and reports both on error.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);

struct Linear {
  Tensor W, b;

  Linear() = default;
  Linear(ParameterStore& ps, const std::string& prefix, Eigen::Index in, Eigen::Index out);
  Tensor forward(const Tensor& x) const { return linear(x, W, b); }
};

struct LayerNorm {
  Tensor gain, bias;

  LayerNorm() = default;
  LayerNorm(ParameterStore& ps, const std::string& prefix, Eigen::Index d);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

// Two-layer ReLU MLP.
struct FFN {
  Linear fc1, fc2;

  FFN() = default;
  FFN(ParameterStore& ps, const std::string& prefix, Eigen::Index in, Eigen::Index hidden,
      Eigen::Index out);
  Tensor forward(const Tensor& x) const { return fc2.forward(relu(fc1.forward(x))); }
};

// Scaled dot-product attention with per-head splits and an output projection.
// An optional additive mask (Lq x Lk, kMaskValue at excluded keys) is applied
// before the softmax.
struct MultiHeadAttention {
  AttentionConfig cfg;
  Linear wq, wk, wv, wo;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& ps, const std::string& prefix, AttentionConfig cfg);
  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v,
                 const Eigen::MatrixXd* add_mask = nullptr) const;
};

// Lookup table of learned rows; gradient accumulates into the table.
struct Embedding {
  Tensor table;

  Embedding() = default;
  Embedding(ParameterStore& ps, const std::string& name, Eigen::Index count, Eigen::Index dim);
  Tensor forward(const std::vector<Eigen::Index>& ids) const { return gather_rows(table, ids); }
};

// Sinusoidal encoding of 3-D positions, d/6 sin/cos pairs per axis at
// octave-spaced frequencies, coordinates normalized by the scene span so the
// lowest frequency stays injective across the range. Not differentiable
// (positions are raw inputs).
Eigen::MatrixXd sinusoidal_pe(const Eigen::MatrixXd& positions, int d, const SceneRange& range);

}  // namespace lmot::nn
