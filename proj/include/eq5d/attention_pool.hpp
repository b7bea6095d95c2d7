// SPDX-License-Identifier: Apache-2.0
#pragma once
// Attention pooling over a bag of instance embeddings:
//   e_i = w . tanh(V h_i),  a = softmax(e),  z = sum_i a_i h_i.

#include <string>
#include <vector>

#include "eq5d/autograd.hpp"
#include "eq5d/rng.hpp"

namespace eq5d {

inline constexpr std::size_t kDefaultAttentionDim = 128;

struct PoolOutput {
  nn::Matrix z;  // 1 x d_h
  nn::Matrix a;  // n x 1, softmax weights
  nn::Matrix t;  // n x d_att, tanh(H V^T), kept for the backward pass
};

/// H is n x d_h, V is d_att x d_h, w is 1 x d_att. Throws ValidationError on
/// an empty bag or mismatched shapes.
PoolOutput attention_pool(const nn::Matrix& H, const nn::Matrix& V, const nn::Matrix& w);

struct PoolGradients {
  nn::Matrix H, V, w;
};

/// Gradients of a loss with respect to H, V and w given dL/dz (1 x d_h).
PoolGradients attention_pool_backward(const nn::Matrix& H, const nn::Matrix& V, const nn::Matrix& w,
                                      const PoolOutput& forward, const nn::Matrix& grad_z);

class AttentionPool {
 public:
  AttentionPool() = default;
  AttentionPool(std::size_t hidden, std::size_t attention_dim, Rng& rng);

  /// Differentiable pooling; the weights of this call are written to
  /// `weights_out` when given.
  nn::Var operator()(const nn::Var& H, nn::Matrix* weights_out = nullptr) const;

  void append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const;

  nn::Var V;  // d_att x d_h
  nn::Var w;  // 1 x d_att
};

}  // namespace eq5d
