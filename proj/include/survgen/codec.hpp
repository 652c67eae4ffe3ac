#pragma once

#include <span>
#include <vector>

#include <json.hpp>

#include "survgen/dataset.hpp"
#include "survgen/rng.hpp"

namespace survgen {

/// 1-D Gaussian mixture for one continuous feature; only retained components
/// are stored (weight >= 1e-3 after EM, renormalized).
struct GmmSpec {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> stds;
  int max_components = 10;

  std::size_t components() const { return weights.size(); }
};

/// EM with k-means++ init; <=100 iterations, log-likelihood tolerance 1e-6,
/// std floor 1e-6. Deterministic given the rng state.
GmmSpec fit_gmm_1d(std::span<const double> values, int max_components, Rng& rng);

struct CodecConfig {
  int max_components = 10;
  int time_bins = 10;
  double clip = 4.0;
  bool sample_modes = false;  // sample mode by responsibility instead of argmax
};

/// One contiguous slot range in an encoded or condition vector.
struct SlotBlock {
  std::size_t offset = 0;
  std::size_t size = 0;
  bool onehot = false;  // generator applies a softmax over one-hot blocks
};

/// Discrete condition cell: per-feature mode/category index, time bin, event
/// flag. Ordered so it can key a map.
struct ConditionCell {
  std::vector<int> feature_classes;
  int time_bin = 0;
  int e = 0;

  bool operator==(const ConditionCell&) const = default;
  bool operator<(const ConditionCell& o) const {
    if (feature_classes != o.feature_classes)
      return feature_classes < o.feature_classes;
    if (time_bin != o.time_bin) return time_bin < o.time_bin;
    return e < o.e;
  }
};

/// Mode-specific normalization for continuous features, one-hot for
/// categoricals, and the condition encoder over (x, t, E).
class Codec {
 public:
  static Codec fit(const SurvivalDataset& train, CodecConfig cfg, int seed);

  /// rng is only consulted when cfg.sample_modes is set.
  std::vector<double> encode(const std::vector<double>& row,
                             Rng* rng = nullptr) const;
  std::vector<double> decode(const std::vector<double>& encoded) const;

  ConditionCell cell_of(const std::vector<double>& row, double t, int e,
                        Rng* rng = nullptr) const;
  std::vector<double> condition_from_cell(const ConditionCell& cell) const;
  std::vector<double> class_encode(const std::vector<double>& row, double t,
                                   int e, Rng* rng = nullptr) const;

  int time_bin_of(double t) const;
  /// Midpoint of a time bin (used when a condition has to be turned back
  /// into a representative time).
  double time_bin_midpoint(int bin) const;

  std::size_t encoded_dim() const;
  std::size_t condition_dim() const;
  std::vector<SlotBlock> encoded_blocks() const;
  std::vector<SlotBlock> condition_blocks() const;

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const std::vector<GmmSpec>& gmms() const { return gmms_; }
  const CodecConfig& config() const { return cfg_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }

  nlohmann::json to_json() const;
  static Codec from_json(const nlohmann::json& j);

 private:
  std::size_t classes_of_feature(std::size_t j) const;

  CodecConfig cfg_;
  std::vector<ColumnSchema> schema_;
  std::vector<GmmSpec> gmms_;  // parallel to schema_; unused for categoricals
  double t_min_ = 0.0, t_max_ = 1.0;
};

}  // namespace survgen
