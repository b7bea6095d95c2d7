// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eq5d/autograd.hpp"

namespace eq5d {

/// Linear warm-up to the base rate over `warmup` steps, then linear decay to
/// zero at `total`: lr(s) = base*s/w for s <= w, base*(T-s)/(T-w) after.
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double base_lr, std::size_t warmup_steps, std::size_t total_steps);

  double at(std::size_t step) const;
  std::size_t warmup_steps() const { return warmup_; }
  std::size_t total_steps() const { return total_; }

 private:
  double base_;
  std::size_t warmup_;
  std::size_t total_;
};

/// floor(fraction * total_steps).
std::size_t warmup_steps_for(std::size_t total_steps, double fraction);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay and bias correction. Decay applies only to
/// parameters whose name does not end in ".bias" and does not contain
/// "LayerNorm".
class AdamW {
 public:
  AdamW(std::vector<nn::NamedParameter> params, AdamWOptions options);

  void zero_grad();
  void step(double lr);
  std::size_t steps_taken() const { return t_; }
  static bool decays(const std::string& name);

  std::span<const nn::NamedParameter> parameters() const { return params_; }

 private:
  std::vector<nn::NamedParameter> params_;
  std::vector<bool> decay_;
  std::vector<nn::Matrix> m_, v_;
  AdamWOptions opt_;
  std::size_t t_ = 0;
};

/// Rescales gradients so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(std::span<const nn::NamedParameter> params, double max_norm);

}  // namespace eq5d
