#include "survgen/time_regressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace survgen {

double GbtTree::predict(const Eigen::RowVectorXd& x) const {
  return predict_with([&](int f) { return x(f); });
}

namespace {

// quantile-based candidate thresholds, deduplicated
std::vector<double> feature_thresholds(const Eigen::MatrixXd& x, int col, int bins) {
  std::vector<double> vals(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) vals[i] = x(i, col);
  std::sort(vals.begin(), vals.end());
  std::vector<double> th;
  for (int q = 1; q < bins; ++q) {
    const std::size_t pos = static_cast<std::size_t>(
        static_cast<double>(q) * vals.size() / bins);
    const double v = vals[std::min(pos, vals.size() - 1)];
    if (th.empty() || v > th.back()) th.push_back(v);
  }
  // drop the global maximum: "x <= max" sends everything left
  while (!th.empty() && th.back() >= vals.back()) th.pop_back();
  return th;
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  const std::vector<double>& residuals;
  const std::vector<std::vector<double>>& thresholds;       // per feature
  const std::vector<std::vector<std::uint16_t>>& bin_index; // per feature, per row
  int max_depth;
  int min_leaf;
  GbtTree tree;

  int build(std::vector<std::size_t>& idx, int depth) {
    double sum = 0.0;
    for (std::size_t i : idx) sum += residuals[i];
    const double n = static_cast<double>(idx.size());

    int best_feature = -1;
    std::size_t best_bin = 0;
    double best_gain = 0.0;
    if (depth < max_depth && idx.size() >= 2 * static_cast<std::size_t>(min_leaf)) {
      for (std::size_t f = 0; f < thresholds.size(); ++f) {
        const auto& th = thresholds[f];
        if (th.empty()) continue;
        // histogram of (count, residual sum) over threshold bins
        std::vector<double> cnt(th.size() + 1, 0.0), rsum(th.size() + 1, 0.0);
        for (std::size_t i : idx) {
          const std::uint16_t b = bin_index[f][i];
          cnt[b] += 1.0;
          rsum[b] += residuals[i];
        }
        double cl = 0.0, sl = 0.0;
        for (std::size_t b = 0; b < th.size(); ++b) {
          cl += cnt[b];
          sl += rsum[b];
          const double cr = n - cl, sr = sum - sl;
          if (cl < min_leaf || cr < min_leaf) continue;
          const double gain = sl * sl / cl + sr * sr / cr - sum * sum / n;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_feature = static_cast<int>(f);
            best_bin = b;
          }
        }
      }
    }

    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (best_feature < 0) {
      tree.nodes[id].value = sum / n;
      return id;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (bin_index[best_feature][i] <= best_bin ? left : right).push_back(i);
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = thresholds[best_feature][best_bin];
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

GbtRegressor GbtRegressor::train(const Eigen::MatrixXd& features,
                                 const std::vector<double>& targets,
                                 GbtConfig cfg) {
  const std::size_t n = targets.size();
  if (n == 0 || features.rows() != static_cast<Eigen::Index>(n))
    throw std::invalid_argument("GbtRegressor: empty or misaligned input");
  if (cfg.n_estimators < 1 || cfg.max_depth < 1)
    throw std::invalid_argument("GbtRegressor: bad config");
  if (!features.allFinite())
    throw std::invalid_argument("GbtRegressor: non-finite feature");

  GbtRegressor model;
  model.cfg_ = cfg;
  model.base_ = std::accumulate(targets.begin(), targets.end(), 0.0) / n;

  const std::size_t n_features = static_cast<std::size_t>(features.cols());
  std::vector<std::vector<double>> thresholds(n_features);
  std::vector<std::vector<std::uint16_t>> bin_index(n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    thresholds[f] =
        feature_thresholds(features, static_cast<int>(f), cfg.histogram_bins);
    bin_index[f].resize(n);
    const auto& th = thresholds[f];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
      bin_index[f][i] = static_cast<std::uint16_t>(
          std::lower_bound(th.begin(), th.end(), v) - th.begin());
    }
  }

  std::vector<double> pred(n, model.base_), residuals(n);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (int round = 0; round < cfg.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = targets[i] - pred[i];
    TreeBuilder builder{features, residuals, thresholds, bin_index,
                        cfg.max_depth, cfg.min_samples_leaf, {}};
    std::vector<std::size_t> idx = all;
    builder.build(idx, 0);
    model.trees_.push_back(std::move(builder.tree));

    double mse = 0.0;
    const GbtTree& tree = model.trees_.back();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(i);
      pred[i] += cfg.shrinkage *
                 tree.predict_with([&](int f) { return features(row, f); });
      const double d = targets[i] - pred[i];
      mse += d * d;
    }
    model.train_loss_.push_back(mse / n);
  }
  return model;
}

double GbtRegressor::predict(const Eigen::RowVectorXd& x) const {
  double out = base_;
  for (const auto& tree : trees_) out += cfg_.shrinkage * tree.predict(x);
  return out;
}

Eigen::VectorXd GbtRegressor::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double acc = base_;
    for (const auto& tree : trees_)
      acc += cfg_.shrinkage * tree.predict_with([&](int f) { return x(i, f); });
    out(i) = acc;
  }
  return out;
}

nlohmann::json GbtRegressor::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes)
      nodes.push_back({{"f", nd.feature},
                       {"t", nd.threshold},
                       {"l", nd.left},
                       {"r", nd.right},
                       {"v", nd.value}});
    trees.push_back(std::move(nodes));
  }
  return nlohmann::json{{"base", base_},
                        {"shrinkage", cfg_.shrinkage},
                        {"n_estimators", cfg_.n_estimators},
                        {"max_depth", cfg_.max_depth},
                        {"histogram_bins", cfg_.histogram_bins},
                        {"min_samples_leaf", cfg_.min_samples_leaf},
                        {"trees", trees}};
}

GbtRegressor GbtRegressor::from_json(const nlohmann::json& j) {
  GbtRegressor model;
  model.base_ = j.at("base").get<double>();
  model.cfg_.shrinkage = j.at("shrinkage").get<double>();
  model.cfg_.n_estimators = j.at("n_estimators").get<int>();
  model.cfg_.max_depth = j.at("max_depth").get<int>();
  model.cfg_.histogram_bins = j.at("histogram_bins").get<int>();
  model.cfg_.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  for (const auto& tj : j.at("trees")) {
    GbtTree tree;
    for (const auto& nj : tj) {
      GbtNode nd;
      nd.feature = nj.at("f").get<int>();
      nd.threshold = nj.at("t").get<double>();
      nd.left = nj.at("l").get<int>();
      nd.right = nj.at("r").get<int>();
      nd.value = nj.at("v").get<double>();
      tree.nodes.push_back(nd);
    }
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

namespace {

Eigen::MatrixXd regressor_features(const Eigen::MatrixXd& encoded,
                                   const Eigen::MatrixXd& curves,
                                   const std::vector<int>& events) {
  Eigen::MatrixXd feats(encoded.rows(), encoded.cols() + curves.cols() + 1);
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
    feats.row(i).segment(0, encoded.cols()) = encoded.row(i);
    feats.row(i).segment(encoded.cols(), curves.cols()) = curves.row(i);
    feats(i, feats.cols() - 1) = events[static_cast<std::size_t>(i)];
  }
  return feats;
}

}  // namespace

TimeRegressor TimeRegressor::train(const Eigen::MatrixXd& encoded,
                                   const Eigen::MatrixXd& curves,
                                   const std::vector<double>& times,
                                   const std::vector<int>& events,
                                   const GbtConfig& cfg) {
  if (encoded.rows() != curves.rows() ||
      static_cast<std::size_t>(encoded.rows()) != times.size() ||
      times.size() != events.size())
    throw std::invalid_argument("TimeRegressor: misaligned inputs");
  std::vector<double> targets(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    targets[i] = std::log(times[i] + kTimeEps);
  TimeRegressor reg;
  reg.gbt_ = GbtRegressor::train(regressor_features(encoded, curves, events),
                                 targets, cfg);
  return reg;
}

double TimeRegressor::predict_time(const Eigen::RowVectorXd& encoded,
                                   const Eigen::RowVectorXd& curve, int e) const {
  Eigen::RowVectorXd feats(encoded.size() + curve.size() + 1);
  feats << encoded, curve, static_cast<double>(e);
  return std::max(0.0, std::exp(gbt_.predict(feats)) - kTimeEps);
}

nlohmann::json TimeRegressor::to_json() const {
  return nlohmann::json{{"gbt", gbt_.to_json()}};
}

TimeRegressor TimeRegressor::from_json(const nlohmann::json& j) {
  TimeRegressor reg;
  reg.gbt_ = GbtRegressor::from_json(j.at("gbt"));
  return reg;
}

}  // namespace survgen
