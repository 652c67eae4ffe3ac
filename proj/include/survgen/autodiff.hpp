#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace survgen::ad {

struct Node;
class Gradients;

/// Forward pass produced a NaN/Inf; carries the name of the offending op.
struct finite_error : std::runtime_error {
  explicit finite_error(const std::string& op_name)
      : std::runtime_error("non-finite values produced by op '" + op_name + "'"),
        op(op_name) {}
  std::string op;
};

/// Handle to a node in the computation graph. Copying shares the node.
/// The graph is a DAG of shared_ptrs; dropping every Var frees it.
class Var {
 public:
  Var() = default;

  bool defined() const { return node_ != nullptr; }
  const Eigen::MatrixXd& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;

  /// In-place value update; only allowed on leaves (used by optimizers).
  void set_value(Eigen::MatrixXd v);

  /// Same value, cut loose from the graph (no gradient flows through).
  Var detach() const;

  const Node* id() const { return node_.get(); }

 private:
  std::shared_ptr<Node> node_;
  friend Var make_leaf(Eigen::MatrixXd, bool);
  friend Var make_op(const char*, Eigen::MatrixXd, std::vector<Var>,
                     std::function<std::vector<Var>(const Var&)>);
  friend class Gradients;
  friend Gradients backward(const Var&);
};

Var leaf(Eigen::MatrixXd value, bool requires_grad = false);
Var constant(Eigen::MatrixXd value);
Var scalar(double v, bool requires_grad = false);

/// Gradients keyed by graph node. Entries are Vars themselves, so a gradient
/// can be fed back into the graph and differentiated again (double backward).
class Gradients {
 public:
  bool contains(const Var& v) const { return grads_.count(v.node_.get()) > 0; }
  const Var& at(const Var& v) const;

 private:
  std::unordered_map<const Node*, Var> grads_;
  friend Gradients backward(const Var&);
};

/// Reverse-mode sweep from a 1x1 scalar. Visits each reachable node once in
/// reverse topological order; gradient arithmetic goes through the public ops
/// so results stay differentiable.
Gradients backward(const Var& loss);

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// ---- reductions / broadcasts ----
Var sum_all(const Var& a);                       // -> 1x1
Var mean_all(const Var& a);                      // -> 1x1
Var row_sum(const Var& a);                       // NxM -> Nx1
Var col_sum(const Var& a);                       // NxM -> 1xM
Var tile_scalar(const Var& a, Eigen::Index r, Eigen::Index c);  // 1x1 -> rxc
Var tile_rows(const Var& a, Eigen::Index r);     // 1xM -> rxM
Var tile_cols(const Var& a, Eigen::Index c);     // Nx1 -> Nxc

// ---- nonlinearities ----
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var softmax_rows(const Var& a);

// ---- structural ----
Var cumsum_rows(const Var& a);      // y[i,j] = sum_{k<=j} x[i,k]
Var rev_cumsum_rows(const Var& a);  // y[i,j] = sum_{k>=j} x[i,k]
Var slice_cols(const Var& a, Eigen::Index begin, Eigen::Index len);
Var pad_cols(const Var& a, Eigen::Index begin, Eigen::Index total);
Var hconcat(const Var& a, const Var& b);

}  // namespace survgen::ad
