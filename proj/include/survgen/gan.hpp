#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "survgen/codec.hpp"
#include "survgen/nn.hpp"

namespace survgen {

struct GanConfig {
  int latent_dim = 128;
  std::vector<int> gen_hidden = {250, 250, 250};   // tanh
  std::vector<int> disc_hidden = {250, 250};       // leaky relu
  double gen_dropout = 0.1;
  double disc_dropout = 0.1;
  bool gen_batch_norm = true;  // discriminator never uses batch norm (GP)
  double lr = 1e-3;
  double weight_decay = 1e-3;
  int batch_size = 500;
  int iterations = 1500;
  double gp_lambda = 10.0;
  int critic_steps = 1;
};

enum class SamplerMode {
  full,            // empirical joint over observed condition cells
  censoring_only,  // empirical E, uniform time bin, empirical feature tuple
  uniform          // uniform over distinct observed cells
};

std::string to_string(SamplerMode m);
SamplerMode sampler_mode_from_string(const std::string& s);

/// Categorical distribution over condition cells observed in training data.
class ImbalancedSampler {
 public:
  ImbalancedSampler() = default;
  static ImbalancedSampler fit(const Codec& codec, const SurvivalDataset& train,
                               SamplerMode mode = SamplerMode::full);

  ConditionCell sample(Rng& rng) const;
  SamplerMode mode() const { return mode_; }

  nlohmann::json to_json() const;
  static ImbalancedSampler from_json(const nlohmann::json& j);

  /// Support and probabilities (full/uniform modes; censoring_only assembles
  /// cells from independent parts instead).
  const std::vector<ConditionCell>& cells() const { return cells_; }
  const std::vector<double>& probabilities() const { return probs_; }
  double event_probability() const { return p_event_; }

 private:
  SamplerMode mode_ = SamplerMode::full;
  std::vector<ConditionCell> cells_;
  std::vector<double> probs_, cdf_;
  // censoring_only: feature tuples and E sampled independently, bin uniform
  std::vector<std::vector<int>> feature_tuples_;
  std::vector<double> feature_probs_, feature_cdf_;
  double p_event_ = 0.0;
  int time_bins_ = 1;
};

/// Trained conditional WGAN-GP pair. cond_dim may be zero (unconditional
/// ablation); then condition inputs are ignored.
struct Gan {
  GanConfig config;
  int cond_dim = 0;
  int data_dim = 0;
  std::vector<SlotBlock> data_blocks;
  nn::Mlp generator;
  nn::Mlp discriminator;

  /// Raw generator output passed through the per-block output heads:
  /// softmax over one-hot blocks, identity on scalar slots.
  ad::Var generator_forward(const ad::Var& cond, const ad::Var& z,
                            bool training, Rng* rng) const;
  ad::Var discriminator_forward(const ad::Var& cond, const ad::Var& x,
                                bool training, Rng* rng) const;

  /// n rows; conditions must be n x cond_dim. Deterministic for a fixed rng
  /// state (inference mode, no dropout).
  Eigen::MatrixXd generate(const Eigen::MatrixXd& conditions, Rng& rng) const;

  nlohmann::json to_json() const;
  static Gan from_json(const nlohmann::json& j);
};

struct GanTrainLog {
  std::vector<double> d_loss, g_loss, gradient_penalty;
  void write_csv(const std::string& path) const;
};

struct GanTrainResult {
  Gan gan;
  GanTrainLog log;
};

/// mean over rows of (||grad_x D(cond, x)||_2 - 1)^2 for a leaf x that
/// requires grad; the result stays differentiable w.r.t. the discriminator
/// parameters (double backward).
ad::Var gradient_penalty(const nn::Mlp& disc, const ad::Var& cond,
                         const ad::Var& x, bool training = false,
                         Rng* rng = nullptr);

/// encoded: N x data_dim rows from the codec; conditions: N x cond_dim,
/// row-aligned. One discriminator step then one generator step per iteration
/// (config.critic_steps discriminator steps when raised).
GanTrainResult train_gan(const Eigen::MatrixXd& encoded,
                         const Eigen::MatrixXd& conditions,
                         const std::vector<SlotBlock>& data_blocks,
                         const GanConfig& config, int seed);

}  // namespace survgen
