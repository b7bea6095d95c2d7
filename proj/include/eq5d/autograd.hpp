// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal tape-free reverse-mode autodiff over dense row-major matrices.
// Each op allocates a Node holding its value and a closure that pushes the
// node's gradient into its parents; backward() walks the graph in reverse
// topological order. Graphs are rebuilt on every forward pass.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eq5d::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;

  void accumulate(const Matrix& g);
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() const { return node_->value; }
  /// Gradient, or a zero matrix of the value's shape if none was accumulated.
  Matrix grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_->requires_grad; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// While alive, ops on this thread build no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Building block for custom ops: records `fn` only if grad mode is on and an
/// input requires a gradient.
Var make_op(Matrix value, std::vector<Var> inputs, BackwardFn fn);

/// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
/// x * W^T + b, with W stored (out x in) and b (1 x out).
Var linear(const Var& x, const Var& weight, const Var& bias);
Var add(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var transpose(const Var& a);
Var gelu(const Var& a);
Var tanh(const Var& a);
/// Row-wise normalisation with affine (1 x n) gamma/beta.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps);
Var softmax_rows(const Var& a);
/// Rows of `table` selected by ids.
Var gather_rows(const Var& table, std::span<const std::int32_t> ids);
Var slice_rows(const Var& a, Eigen::Index first, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index first, Eigen::Index count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// Mean softmax cross-entropy of a (1 x C) logit row against a class index.
Var cross_entropy(const Var& logits, int target);
/// Sum of 1x1 values times `factor`.
Var sum_scalars(const std::vector<Var>& scalars, double factor = 1.0);

/// Row-wise numerically stable softmax on plain matrices.
Matrix softmax_rows(const Matrix& a);

struct NamedParameter {
  std::string name;
  Var var;
};

using StateDict = std::map<std::string, Matrix>;

StateDict state_dict(std::span<const NamedParameter> params);
/// Copies matching tensors in; shape mismatches throw. With `strict`, every
/// parameter must be present.
void load_state_dict(std::span<const NamedParameter> params, const StateDict& state, bool strict);
std::uint64_t fingerprint(std::span<const NamedParameter> params);

}  // namespace eq5d::nn
