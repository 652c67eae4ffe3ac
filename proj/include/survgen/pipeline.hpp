#pragma once

#include <optional>
#include <string>
#include <vector>

#include "survgen/codec.hpp"
#include "survgen/gan.hpp"
#include "survgen/survival_net.hpp"
#include "survgen/time_regressor.hpp"

namespace survgen {

struct PipelineConfig {
  CodecConfig codec;
  GanConfig gan;
  DeepHitConfig survival;
  GbtConfig regressor;
  SamplerMode sampler_mode = SamplerMode::full;
  // ablations
  bool no_time_regressor = false;  // sample t from the survival curve PMF
  bool no_conditional_gan = false; // generator/discriminator without C
};

/// Per-stage training diagnostics kept on the fitted model.
struct FitDiagnostics {
  GanTrainLog gan_log;
  std::vector<double> survival_val_loss;
  std::vector<double> regressor_train_loss;
  std::size_t clamped_times = 0;  // generation-time clamp counter (mutable via generate)
};

class SurvivalGanModel {
 public:
  static SurvivalGanModel fit(const SurvivalDataset& train,
                              const PipelineConfig& cfg, int seed);

  /// Draws (C, E) from the sampler — or consumes explicit cells when given
  /// (must hold exactly m entries) — generates covariates, decodes them, and
  /// produces times via the regressor (or the curve-PMF fallback).
  SurvivalDataset generate(std::size_t m, Rng& rng,
                           const std::vector<ConditionCell>* explicit_cells =
                               nullptr) const;

  const Codec& codec() const { return codec_; }
  const ImbalancedSampler& sampler() const { return sampler_; }
  const Gan& gan() const { return gan_; }
  const SurvivalNet& survival_net() const { return survival_; }
  const TimeRegressor& time_regressor() const { return regressor_; }
  const PipelineConfig& config() const { return cfg_; }
  const FitDiagnostics& diagnostics() const { return diag_; }

  /// Encoded representation used by the survival net (decode -> re-encode for
  /// generated rows keeps both sides consistent).
  Eigen::MatrixXd encode_dataset(const SurvivalDataset& ds) const;

  nlohmann::json to_json() const;
  static SurvivalGanModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static SurvivalGanModel load(const std::string& path);

 private:
  SurvivalGanModel() = default;

  PipelineConfig cfg_;
  Codec codec_;
  ImbalancedSampler sampler_;
  Gan gan_;
  SurvivalNet survival_;
  TimeRegressor regressor_;
  bool has_regressor_ = true;
  std::vector<ColumnSchema> schema_;
  std::string time_name_ = "time";
  std::string event_name_ = "event";
  double max_train_time_ = 0.0;
  mutable FitDiagnostics diag_;
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

}  // namespace survgen
