#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "survgen/autodiff.hpp"
#include "survgen/rng.hpp"

namespace survgen::nn {

enum class Activation { identity, relu, leaky_relu, tanh, softmax };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully connected layer, optionally followed by batch norm, the activation,
/// then (inverted) dropout. Batch norm keeps running statistics with
/// momentum 0.1 for inference.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(int in, int out, Activation act, bool batch_norm, double dropout,
             Rng& rng);

  ad::Var forward(const ad::Var& x, bool training, Rng* rng) const;
  std::vector<ad::Var> parameters() const;

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }

  nlohmann::json to_json() const;
  static DenseLayer from_json(const nlohmann::json& j);

 private:
  int in_ = 0, out_ = 0;
  Activation act_ = Activation::identity;
  bool batch_norm_ = false;
  double dropout_ = 0.0;

  ad::Var w_, b_;          // in_ x out_, 1 x out_
  ad::Var gamma_, beta_;   // 1 x out_ when batch_norm_
  mutable Eigen::RowVectorXd running_mean_, running_var_;
};

struct MlpConfig {
  int input_dim = 0;
  std::vector<int> widths;          // per layer, last entry = output dim
  std::vector<Activation> acts;     // per layer, same length as widths
  double dropout = 0.0;             // hidden layers only
  bool batch_norm = false;          // hidden layers only
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpConfig& cfg, Rng& rng);

  /// x is batch x input_dim. rng may be null when training == false or
  /// dropout == 0.
  ad::Var forward(const ad::Var& x, bool training = false, Rng* rng = nullptr) const;
  std::vector<ad::Var> parameters() const;
  const MlpConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  MlpConfig cfg_;
  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (applied directly to params)
};

class Adam {
 public:
  Adam(std::vector<ad::Var> params, AdamConfig cfg);

  /// Parameters without a recorded gradient are still subject to weight decay.
  void step(const ad::Gradients& grads);
  long long iterations() const { return t_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<Eigen::MatrixXd> m_, v_;
  AdamConfig cfg_;
  long long t_ = 0;
};

}  // namespace survgen::nn
