#pragma once

#include <vector>

#include <json.hpp>

#include "survgen/nn.hpp"

namespace survgen {

/// Evenly spaced horizon times over the training time range.
struct HorizonGrid {
  std::vector<double> times;

  static HorizonGrid make(double t_min, double t_max, int n = 100);
  /// Rightmost index with times[i] <= t; times before the first horizon map
  /// to bin 0.
  int bin_of(double t) const;
  int size() const { return static_cast<int>(times.size()); }
};

struct DeepHitConfig {
  int hidden_width = 300;
  int hidden_layers = 2;
  int bins = 100;
  int batch_size = 100;
  int max_epochs = 2000;
  int patience = 20;
  double lr = 1e-3;
  double alpha = 0.28;
  double sigma = 0.38;
  double dropout = 0.02;
  bool batch_norm = true;
  double val_fraction = 0.1;  // early-stopping split
};

/// Discrete-time single-risk survival network: softmax PMF over the horizon
/// bins, S(t_i) = 1 - cumulative mass up to bin i.
class SurvivalNet {
 public:
  SurvivalNet() = default;

  /// L_LL + alpha * L_rank on raw logits (batch x bins). Exposed so the
  /// gradient can be checked against finite differences on tiny instances.
  /// L_LL averages over subjects; L_rank averages over acceptable pairs
  /// (i with event, t_i < t_j on raw times).
  static ad::Var loss(const ad::Var& logits, const std::vector<int>& bins,
                      const std::vector<int>& events,
                      const std::vector<double>& times, double alpha,
                      double sigma);

  static SurvivalNet train(const Eigen::MatrixXd& encoded,
                           const std::vector<double>& times,
                           const std::vector<int>& events,
                           const HorizonGrid& grid, const DeepHitConfig& cfg,
                           int seed,
                           std::vector<double>* val_history = nullptr);

  /// rows x N_H matrix of S(x, t_i); non-increasing along each row.
  Eigen::MatrixXd predict_curves(const Eigen::MatrixXd& encoded) const;
  /// rows x bins event-time PMF (softmax output).
  Eigen::MatrixXd predict_pmf(const Eigen::MatrixXd& encoded) const;

  const HorizonGrid& grid() const { return grid_; }
  const DeepHitConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static SurvivalNet from_json(const nlohmann::json& j);

 private:
  HorizonGrid grid_;
  DeepHitConfig cfg_;
  nn::Mlp net_;
};

}  // namespace survgen
