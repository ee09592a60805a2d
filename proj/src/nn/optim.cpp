// SPDX-License-Identifier: Apache-2.0
#include "lmot/nn/optim.hpp"

#include <cmath>

#include "lmot/common.hpp"

namespace lmot::nn {

void AdamWConfig::validate() const {
  if (lr <= 0.0) throw ValidationError("AdamW: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ValidationError("AdamW: betas must lie in [0,1)");
  if (eps <= 0.0 || weight_decay < 0.0) throw ValidationError("AdamW: bad eps/weight_decay");
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, step_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const Eigen::MatrixXd& g = p.grad();  // zeros if nothing accumulated
    if (!g.allFinite())
      throw NumericError("AdamW: non-finite gradient in parameter '" + p.name() + "'");
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Eigen::ArrayXXd mhat = m_[i].array() / bc1;
    Eigen::ArrayXXd vhat = v_[i].array() / bc2;
    auto& val = p.mutable_value();
    val.array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.eps);
    val.array() -= cfg_.lr * cfg_.weight_decay * val.array();
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace lmot::nn
