#include "survgen/autodiff.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

namespace survgen::ad {

struct Node {
  Eigen::MatrixXd value;
  std::vector<Var> parents;
  std::function<std::vector<Var>(const Var&)> vjp;
  const char* op = "leaf";
  bool requires_grad = false;
};

const Eigen::MatrixXd& Var::value() const {
  if (!node_) throw std::logic_error("use of an empty Var");
  return node_->value;
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

void Var::set_value(Eigen::MatrixXd v) {
  if (!node_) throw std::logic_error("use of an empty Var");
  if (!node_->parents.empty())
    throw std::logic_error("set_value is only allowed on leaf nodes");
  if (v.rows() != node_->value.rows() || v.cols() != node_->value.cols())
    throw std::invalid_argument("set_value: shape change not allowed");
  node_->value = std::move(v);
}

Var Var::detach() const { return leaf(value(), false); }

Var make_leaf(Eigen::MatrixXd value, bool requires_grad) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  v.node_->requires_grad = requires_grad;
  return v;
}

Var leaf(Eigen::MatrixXd value, bool requires_grad) {
  return make_leaf(std::move(value), requires_grad);
}

Var constant(Eigen::MatrixXd value) { return make_leaf(std::move(value), false); }

Var scalar(double v, bool requires_grad) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return make_leaf(std::move(m), requires_grad);
}

Var make_op(const char* op, Eigen::MatrixXd value, std::vector<Var> parents,
            std::function<std::vector<Var>(const Var&)> vjp) {
  if (!value.allFinite()) throw finite_error(op);
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  v.node_->op = op;
  for (const Var& p : parents)
    if (p.requires_grad()) v.node_->requires_grad = true;
  if (v.node_->requires_grad) {
    v.node_->parents = std::move(parents);
    v.node_->vjp = std::move(vjp);
  }
  // Constant subgraphs keep no parents: backward never enters them and the
  // nodes behind them can be freed early.
  return v;
}

const Var& Gradients::at(const Var& v) const {
  const auto it = grads_.find(v.node_.get());
  if (it == grads_.end())
    throw std::logic_error("no gradient recorded for this Var");
  return it->second;
}

Gradients backward(const Var& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1x1 scalar");

  // Post-order DFS over grad-requiring ancestors.
  std::vector<const Node*> topo;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack;
  if (loss.requires_grad()) stack.emplace_back(loss.node_.get(), 0);
  visited.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Node* p = node->parents[next].node_.get();
      ++next;
      if (node->parents[next - 1].requires_grad() && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  Gradients out;
  out.grads_[loss.node_.get()] = constant(Eigen::MatrixXd::Ones(1, 1));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const Node* node = *it;
    const auto git = out.grads_.find(node);
    if (git == out.grads_.end()) continue;  // unreachable via grad paths
    if (!node->vjp) continue;               // leaf
    const std::vector<Var> pgrads = node->vjp(git->second);
    if (pgrads.size() != node->parents.size())
      throw std::logic_error(std::string("vjp arity mismatch in op '") + node->op + "'");
    for (std::size_t i = 0; i < pgrads.size(); ++i) {
      const Var& parent = node->parents[i];
      if (!parent.requires_grad()) continue;
      auto [slot, fresh] = out.grads_.try_emplace(parent.node_.get(), pgrads[i]);
      if (!fresh) slot->second = add(slot->second, pgrads[i]);
    }
  }
  return out;
}

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  return make_op("add", a.value() + b.value(), {a, b},
                 [](const Var& up) { return std::vector<Var>{up, up}; });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  return make_op("sub", a.value() - b.value(), {a, b},
                 [](const Var& up) { return std::vector<Var>{up, neg(up)}; });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  return make_op("mul", a.value().cwiseProduct(b.value()), {a, b},
                 [a, b](const Var& up) {
                   return std::vector<Var>{mul(up, b), mul(up, a)};
                 });
}

Var div(const Var& a, const Var& b) {
  same_shape(a, b, "div");
  return make_op("div", a.value().cwiseQuotient(b.value()), {a, b},
                 [a, b](const Var& up) {
                   return std::vector<Var>{div(up, b),
                                           neg(div(mul(up, a), square(b)))};
                 });
}

Var neg(const Var& a) {
  return make_op("neg", -a.value(), {a},
                 [](const Var& up) { return std::vector<Var>{neg(up)}; });
}

Var scale(const Var& a, double s) {
  return make_op("scale", a.value() * s, {a},
                 [s](const Var& up) { return std::vector<Var>{scale(up, s)}; });
}

Var add_scalar(const Var& a, double s) {
  return make_op("add_scalar", (a.value().array() + s).matrix(), {a},
                 [](const Var& up) { return std::vector<Var>{up}; });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims differ");
  return make_op("matmul", a.value() * b.value(), {a, b},
                 [a, b](const Var& up) {
                   return std::vector<Var>{matmul(up, transpose(b)),
                                           matmul(transpose(a), up)};
                 });
}

Var transpose(const Var& a) {
  return make_op("transpose", a.value().transpose(), {a},
                 [](const Var& up) { return std::vector<Var>{transpose(up)}; });
}

Var sum_all(const Var& a) {
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return make_op("sum_all", std::move(v), {a}, [r, c](const Var& up) {
    return std::vector<Var>{tile_scalar(up, r, c)};
  });
}

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Var row_sum(const Var& a) {
  const Eigen::Index c = a.cols();
  return make_op("row_sum", a.value().rowwise().sum(), {a},
                 [c](const Var& up) { return std::vector<Var>{tile_cols(up, c)}; });
}

Var col_sum(const Var& a) {
  const Eigen::Index r = a.rows();
  return make_op("col_sum", a.value().colwise().sum(), {a},
                 [r](const Var& up) { return std::vector<Var>{tile_rows(up, r)}; });
}

Var tile_scalar(const Var& a, Eigen::Index r, Eigen::Index c) {
  if (a.rows() != 1 || a.cols() != 1)
    throw std::invalid_argument("tile_scalar: input must be 1x1");
  return make_op("tile_scalar", Eigen::MatrixXd::Constant(r, c, a.value()(0, 0)),
                 {a},
                 [](const Var& up) { return std::vector<Var>{sum_all(up)}; });
}

Var tile_rows(const Var& a, Eigen::Index r) {
  if (a.rows() != 1) throw std::invalid_argument("tile_rows: input must be 1xM");
  return make_op("tile_rows", a.value().replicate(r, 1), {a},
                 [](const Var& up) { return std::vector<Var>{col_sum(up)}; });
}

Var tile_cols(const Var& a, Eigen::Index c) {
  if (a.cols() != 1) throw std::invalid_argument("tile_cols: input must be Nx1");
  return make_op("tile_cols", a.value().replicate(1, c), {a},
                 [](const Var& up) { return std::vector<Var>{row_sum(up)}; });
}

Var tanh(const Var& a) {
  return make_op("tanh", a.value().array().tanh().matrix(), {a}, [a](const Var& up) {
    // recompute tanh(a) instead of capturing the output Var (no cycles)
    return std::vector<Var>{mul(up, add_scalar(neg(square(tanh(a))), 1.0))};
  });
}

Var relu(const Var& a) {
  // the 0/1 mask enters the graph as a constant: correct almost everywhere,
  // and second derivatives through it are zero as expected
  Eigen::MatrixXd mask =
      a.value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
  Eigen::MatrixXd out = a.value().cwiseProduct(mask);
  const Var m = constant(std::move(mask));
  return make_op("relu", std::move(out), {a}, [m](const Var& up) {
    return std::vector<Var>{mul(up, m)};
  });
}

Var leaky_relu(const Var& a, double slope) {
  Eigen::MatrixXd mask =
      a.value().unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
  Eigen::MatrixXd out = a.value().cwiseProduct(mask);
  const Var m = constant(std::move(mask));
  return make_op("leaky_relu", std::move(out), {a}, [m](const Var& up) {
    return std::vector<Var>{mul(up, m)};
  });
}

Var exp(const Var& a) {
  return make_op("exp", a.value().array().exp().matrix(), {a}, [a](const Var& up) {
    return std::vector<Var>{mul(up, exp(a))};
  });
}

Var log(const Var& a) {
  return make_op("log", a.value().array().log().matrix(), {a}, [a](const Var& up) {
    return std::vector<Var>{div(up, a)};
  });
}

Var sqrt(const Var& a) {
  return make_op("sqrt", a.value().array().sqrt().matrix(), {a}, [a](const Var& up) {
    return std::vector<Var>{div(up, scale(sqrt(a), 2.0))};
  });
}

Var square(const Var& a) {
  return make_op("square", a.value().array().square().matrix(), {a}, [a](const Var& up) {
    return std::vector<Var>{mul(up, scale(a, 2.0))};
  });
}

Var softmax_rows(const Var& a) {
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double m = v.row(i).maxCoeff();
    v.row(i) = (v.row(i).array() - m).exp();
    v.row(i) /= v.row(i).sum();
  }
  const Eigen::Index c = a.cols();
  return make_op("softmax_rows", std::move(v), {a}, [a, c](const Var& up) {
    const Var s = softmax_rows(a);
    const Var t = mul(s, up);
    return std::vector<Var>{sub(t, mul(s, tile_cols(row_sum(t), c)))};
  });
}

Var cumsum_rows(const Var& a) {
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = 1; j < v.cols(); ++j) v(i, j) += v(i, j - 1);
  return make_op("cumsum_rows", std::move(v), {a}, [](const Var& up) {
    return std::vector<Var>{rev_cumsum_rows(up)};
  });
}

Var rev_cumsum_rows(const Var& a) {
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index j = v.cols() - 2; j >= 0; --j) v(i, j) += v(i, j + 1);
  return make_op("rev_cumsum_rows", std::move(v), {a}, [](const Var& up) {
    return std::vector<Var>{cumsum_rows(up)};
  });
}

Var slice_cols(const Var& a, Eigen::Index begin, Eigen::Index len) {
  if (begin < 0 || len < 0 || begin + len > a.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  const Eigen::Index total = a.cols();
  return make_op("slice_cols", a.value().middleCols(begin, len), {a},
                 [begin, total](const Var& up) {
                   return std::vector<Var>{pad_cols(up, begin, total)};
                 });
}

Var pad_cols(const Var& a, Eigen::Index begin, Eigen::Index total) {
  if (begin < 0 || begin + a.cols() > total)
    throw std::invalid_argument("pad_cols: range out of bounds");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(a.rows(), total);
  v.middleCols(begin, a.cols()) = a.value();
  const Eigen::Index len = a.cols();
  return make_op("pad_cols", std::move(v), {a}, [begin, len](const Var& up) {
    return std::vector<Var>{slice_cols(up, begin, len)};
  });
}

Var hconcat(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hconcat: row mismatch");
  Eigen::MatrixXd v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return make_op("hconcat", std::move(v), {a, b}, [ca, cb](const Var& up) {
    return std::vector<Var>{slice_cols(up, 0, ca), slice_cols(up, ca, cb)};
  });
}

}  // namespace survgen::ad
