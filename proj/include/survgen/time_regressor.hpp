#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace survgen {

struct GbtConfig {
  int n_estimators = 200;
  int max_depth = 5;
  double shrinkage = 0.1;
  int histogram_bins = 256;
  int min_samples_leaf = 1;
};

struct GbtNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

struct GbtTree {
  std::vector<GbtNode> nodes;

  /// at(feature) -> value; lets callers avoid materializing rows.
  template <class F>
  double predict_with(F&& at) const {
    int i = 0;
    while (nodes[i].feature >= 0)
      i = at(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left
                                                     : nodes[i].right;
    return nodes[i].value;
  }
  double predict(const Eigen::RowVectorXd& x) const;
};

/// Squared-error gradient boosting with histogram split finding. Splits use
/// quantile-derived thresholds; x <= threshold goes left. Deterministic.
class GbtRegressor {
 public:
  static GbtRegressor train(const Eigen::MatrixXd& features,
                            const std::vector<double>& targets, GbtConfig cfg);

  double predict(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  /// Training MSE after each boosting round (non-increasing).
  const std::vector<double>& training_loss() const { return train_loss_; }
  const GbtConfig& config() const { return cfg_; }

  nlohmann::json to_json() const;
  static GbtRegressor from_json(const nlohmann::json& j);

 private:
  GbtConfig cfg_;
  double base_ = 0.0;
  std::vector<GbtTree> trees_;
  std::vector<double> train_loss_;
};

/// Boosted trees on log(t + eps) over [encoded covariates | survival curve |
/// E]; predicts a nonnegative time.
class TimeRegressor {
 public:
  static constexpr double kTimeEps = 1e-6;

  static TimeRegressor train(const Eigen::MatrixXd& encoded,
                             const Eigen::MatrixXd& curves,
                             const std::vector<double>& times,
                             const std::vector<int>& events,
                             const GbtConfig& cfg);

  double predict_time(const Eigen::RowVectorXd& encoded,
                      const Eigen::RowVectorXd& curve, int e) const;

  const GbtRegressor& model() const { return gbt_; }

  nlohmann::json to_json() const;
  static TimeRegressor from_json(const nlohmann::json& j);

 private:
  GbtRegressor gbt_;
};

}  // namespace survgen
