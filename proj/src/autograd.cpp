// SPDX-License-Identifier: Apache-2.0
#include "eq5d/autograd.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "eq5d/error.hpp"
#include "eq5d/rng.hpp"

namespace eq5d::nn {

namespace {

thread_local bool g_grad_enabled = true;

void push(Node& self, std::size_t i, const Matrix& g) {
  auto& p = self.parents[i];
  if (p->requires_grad) p->accumulate(g);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var make_op(Matrix value, std::vector<Var> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ValidationError("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
  // Interior nodes are not reused; release their gradients and closures.
  for (Node* n : order) {
    if (n->backward) {
      n->grad.resize(0, 0);
      n->backward = nullptr;
      n->parents.clear();
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: shape mismatch");
  Matrix v = a.value() * b.value();
  return make_op(std::move(v), {a, b}, [](Node& self) {
    const Matrix& A = self.parents[0]->value;
    const Matrix& B = self.parents[1]->value;
    if (self.parents[0]->requires_grad) push(self, 0, self.grad * B.transpose());
    if (self.parents[1]->requires_grad) push(self, 1, A.transpose() * self.grad);
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.cols() || bias.cols() != weight.rows() || bias.rows() != 1)
    throw ValidationError("linear: shape mismatch");
  Matrix v = x.value() * weight.value().transpose();
  v.rowwise() += bias.value().row(0);
  return make_op(std::move(v), {x, weight, bias}, [](Node& self) {
    const Matrix& X = self.parents[0]->value;
    const Matrix& W = self.parents[1]->value;
    if (self.parents[0]->requires_grad) push(self, 0, self.grad * W);
    if (self.parents[1]->requires_grad) push(self, 1, self.grad.transpose() * X);
    if (self.parents[2]->requires_grad) push(self, 2, self.grad.colwise().sum());
  });
}

Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("add: shape mismatch");
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    push(self, 0, self.grad);
    push(self, 1, self.grad);
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) { push(self, 0, self.grad * s); });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](Node& self) { push(self, 0, self.grad.transpose()); });
}

Var gelu(const Var& a) {
  const Matrix& x = a.value();
  Matrix v = x.unaryExpr([](double t) { return 0.5 * t * (1.0 + std::erf(t * std::numbers::sqrt2 / 2.0)); });
  return make_op(std::move(v), {a}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    Matrix d = x.unaryExpr([](double t) {
      const double cdf = 0.5 * (1.0 + std::erf(t * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + t * pdf;
    });
    push(self, 0, self.grad.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  Matrix v = a.value().array().tanh().matrix();
  return make_op(std::move(v), {a}, [](Node& self) {
    const Matrix& y = self.value;
    push(self, 0, self.grad.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Matrix& X = x.value();
  const Eigen::Index n = X.cols();
  if (gamma.cols() != n || beta.cols() != n) throw ValidationError("layer_norm: shape mismatch");
  auto xhat = std::make_shared<Matrix>(X.rows(), n);
  auto inv_std = std::make_shared<Eigen::VectorXd>(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (X.row(r).array() - mu) * (*inv_std)(r);
  }
  Matrix v = xhat->array().rowwise() * gamma.value().row(0).array();
  v.rowwise() += beta.value().row(0);
  return make_op(std::move(v), {x, gamma, beta}, [xhat, inv_std](Node& self) {
    const Matrix& g = self.grad;
    const Matrix& gam = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Matrix gx(g.rows(), g.cols());
      const double n = static_cast<double>(g.cols());
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const RowVector gh = g.row(r).cwiseProduct(gam.row(0));
        const double mean_gh = gh.sum() / n;
        const double mean_ghx = gh.cwiseProduct(xhat->row(r)).sum() / n;
        gx.row(r) = (*inv_std)(r) * (gh.array() - mean_gh - xhat->row(r).array() * mean_ghx).matrix();
      }
      push(self, 0, gx);
    }
    if (self.parents[1]->requires_grad) push(self, 1, g.cwiseProduct(*xhat).colwise().sum());
    if (self.parents[2]->requires_grad) push(self, 2, g.colwise().sum());
  });
}

Matrix softmax_rows(const Matrix& a) {
  Matrix y(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.row(r).maxCoeff();
    y.row(r) = (a.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

Var softmax_rows(const Var& a) {
  return make_op(softmax_rows(a.value()), {a}, [](Node& self) {
    const Matrix& y = self.value;
    const Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = self.grad;
    g.colwise() -= dot;
    push(self, 0, g.cwiseProduct(y));
  });
}

Var gather_rows(const Var& table, std::span<const std::int32_t> ids) {
  const Matrix& T = table.value();
  Matrix v(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= T.rows()) throw ValidationError("gather_rows: id out of range");
    v.row(static_cast<Eigen::Index>(i)) = T.row(ids[i]);
  }
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  return make_op(std::move(v), {table}, [idx = std::move(idx)](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) p.grad.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var slice_rows(const Var& a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.rows()) throw ValidationError("slice_rows: out of range");
  Matrix v = a.value().middleRows(first, count);
  return make_op(std::move(v), {a}, [first, count](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleRows(first, count) += self.grad;
  });
}

Var slice_cols(const Var& a, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > a.cols()) throw ValidationError("slice_cols: out of range");
  Matrix v = a.value().middleCols(first, count);
  return make_op(std::move(v), {a}, [first, count](Node& self) {
    auto& p = *self.parents[0];
    if (p.grad.size() == 0) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    p.grad.middleCols(first, count) += self.grad;
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ValidationError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_op(std::move(v), parts, [](Node& self) {
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const Eigen::Index n = self.parents[i]->value.rows();
      if (self.parents[i]->requires_grad) push(self, i, self.grad.middleRows(r, n));
      r += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ValidationError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_op(std::move(v), parts, [](Node& self) {
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const Eigen::Index n = self.parents[i]->value.cols();
      if (self.parents[i]->requires_grad) push(self, i, self.grad.middleCols(c, n));
      c += n;
    }
  });
}

Var cross_entropy(const Var& logits, int target) {
  if (logits.rows() != 1 || target < 0 || target >= logits.cols())
    throw ValidationError("cross_entropy: expects a single logit row and a valid class");
  const Matrix p = softmax_rows(logits.value());
  // log-sum-exp form: non-finite only when the logits themselves are.
  Matrix v(1, 1);
  const double m = logits.value().maxCoeff();
  v(0, 0) = m + std::log((logits.value().array() - m).exp().sum()) - logits.value()(0, target);
  return make_op(std::move(v), {logits}, [p, target](Node& self) {
    Matrix g = p;
    g(0, target) -= 1.0;
    push(self, 0, g * self.grad(0, 0));
  });
}

Var sum_scalars(const std::vector<Var>& scalars, double factor) {
  Matrix v = Matrix::Zero(1, 1);
  for (const auto& s : scalars) v(0, 0) += s.scalar();
  v *= factor;
  return make_op(std::move(v), scalars, [factor](Node& self) {
    const Matrix g = self.grad * factor;
    for (std::size_t i = 0; i < self.parents.size(); ++i) push(self, i, g);
  });
}

StateDict state_dict(std::span<const NamedParameter> params) {
  StateDict out;
  for (const auto& p : params) out.emplace(p.name, p.var.value());
  return out;
}

void load_state_dict(std::span<const NamedParameter> params, const StateDict& state, bool strict) {
  for (const auto& p : params) {
    const auto it = state.find(p.name);
    if (it == state.end()) {
      if (strict) throw ConfigError("state dict lacks parameter '" + p.name + "'");
      continue;
    }
    const Matrix& src = it->second;
    Matrix& dst = p.var.mutable_value();
    if (src.rows() != dst.rows() || src.cols() != dst.cols())
      throw ConfigError("parameter '" + p.name + "' has shape " + std::to_string(src.rows()) + "x" +
                        std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) + "x" +
                        std::to_string(dst.cols()));
    dst = src;
  }
}

std::uint64_t fingerprint(std::span<const NamedParameter> params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params) {
    h = fnv1a64(p.name, h);
    const Matrix& m = p.var.value();
    h = fnv1a64(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
  }
  return h;
}

}  // namespace eq5d::nn
