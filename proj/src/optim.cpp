// SPDX-License-Identifier: Apache-2.0
#include "eq5d/optim.hpp"

#include <algorithm>
#include <cmath>

#include "eq5d/error.hpp"

namespace eq5d {

LinearWarmupSchedule::LinearWarmupSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps)
    : base_(base_lr), warmup_(warmup_steps), total_(total_steps) {
  if (warmup_ > total_) throw ValidationError("warm-up steps exceed total steps");
}

double LinearWarmupSchedule::at(std::size_t step) const {
  if (step < warmup_) return base_ * static_cast<double>(step) / static_cast<double>(warmup_);
  if (step >= total_) return 0.0;
  return base_ * static_cast<double>(total_ - step) / static_cast<double>(std::max<std::size_t>(1, total_ - warmup_));
}

std::size_t warmup_steps_for(std::size_t total_steps, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total_steps) + 1e-9));
}

AdamW::AdamW(std::vector<nn::NamedParameter> params, AdamWOptions options)
    : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    decay_.push_back(decays(p.name));
    m_.push_back(nn::Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(nn::Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

bool AdamW::decays(const std::string& name) {
  const bool is_bias = name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
  return !is_bias && name.find("LayerNorm") == std::string::npos;
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.var.node()->grad.resize(0, 0);
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].var.node();
    if (node.grad.size() == 0) continue;
    nn::Matrix& w = node.value;
    if (decay_[i] && opt_.weight_decay != 0.0) w *= (1.0 - lr * opt_.weight_decay);
    m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * node.grad;
    v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * node.grad.cwiseAbs2();
    const double step_size = lr / bc1;
    const double denom_scale = 1.0 / std::sqrt(bc2);
    w.array() -= step_size * m_[i].array() / ((v_[i].array().sqrt() * denom_scale) + opt_.epsilon);
  }
}

double clip_grad_norm(std::span<const nn::NamedParameter> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.var.has_grad()) sq += p.var.node()->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double f = max_norm / (norm + 1e-6);
    for (const auto& p : params)
      if (p.var.has_grad()) p.var.node()->grad *= f;
  }
  return norm;
}

}  // namespace eq5d
