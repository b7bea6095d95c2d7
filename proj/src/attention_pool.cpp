// SPDX-License-Identifier: Apache-2.0
#include "eq5d/attention_pool.hpp"

#include <cmath>

#include "eq5d/error.hpp"

namespace eq5d {

using nn::Matrix;

PoolOutput attention_pool(const Matrix& H, const Matrix& V, const Matrix& w) {
  if (H.rows() == 0) throw ValidationError("attention_pool: empty bag");
  if (V.cols() != H.cols() || w.rows() != 1 || w.cols() != V.rows())
    throw ValidationError("attention_pool: shape mismatch");
  PoolOutput out;
  out.t = (H * V.transpose()).array().tanh().matrix();
  Matrix e = out.t * w.transpose();
  const double m = e.maxCoeff();
  out.a = (e.array() - m).exp().matrix();
  out.a /= out.a.sum();
  out.z = out.a.transpose() * H;
  return out;
}

PoolGradients attention_pool_backward(const Matrix& H, const Matrix& V, const Matrix& w, const PoolOutput& f,
                                      const Matrix& grad_z) {
  const Matrix& a = f.a;
  const Matrix ga = H * grad_z.transpose();  // n x 1
  const double avg = (a.array() * ga.array()).sum();
  const Matrix ge = (a.array() * (ga.array() - avg)).matrix();
  const Matrix gu = ((ge * w).array() * (1.0 - f.t.array().square())).matrix();
  PoolGradients g;
  g.w = ge.transpose() * f.t;
  g.V = gu.transpose() * H;
  g.H = a * grad_z + gu * V;
  return g;
}

AttentionPool::AttentionPool(std::size_t hidden, std::size_t attention_dim, Rng& rng) {
  Matrix v(attention_dim, hidden);
  const double sv = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal() * sv;
  Matrix ww(1, attention_dim);
  const double sw = 1.0 / std::sqrt(static_cast<double>(attention_dim));
  for (Eigen::Index i = 0; i < ww.size(); ++i) ww.data()[i] = rng.normal() * sw;
  V = nn::Var(std::move(v), true);
  w = nn::Var(std::move(ww), true);
}

nn::Var AttentionPool::operator()(const nn::Var& H, Matrix* weights_out) const {
  auto f = std::make_shared<PoolOutput>(attention_pool(H.value(), V.value(), w.value()));
  if (weights_out) *weights_out = f->a;
  Matrix z = f->z;
  return nn::make_op(std::move(z), {H, V, w}, [f](nn::Node& self) {
    const auto& h = self.parents[0]->value;
    const auto& v = self.parents[1]->value;
    const auto& ww = self.parents[2]->value;
    const PoolGradients g = attention_pool_backward(h, v, ww, *f, self.grad);
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(g.H);
    if (self.parents[1]->requires_grad) self.parents[1]->accumulate(g.V);
    if (self.parents[2]->requires_grad) self.parents[2]->accumulate(g.w);
  });
}

void AttentionPool::append_parameters(const std::string& prefix, std::vector<nn::NamedParameter>& out) const {
  out.push_back({prefix + "V", V});
  out.push_back({prefix + "w", w});
}

}  // namespace eq5d
