#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "survgen/dataset.hpp"
#include "survgen/pipeline.hpp"

namespace survgen {

struct DatasetSpec {
  std::string path;
  std::string time_column = "time";
  std::string event_column = "event";
  std::vector<ColumnSchema> schema;
};

struct MetricSettings {
  int horizons = 5;
  std::vector<int> seeds = {1, 2, 3, 4, 5};
  double train_fraction = 0.8;
  std::size_t synthetic_rows = 0;  // 0 = one synthetic row per training row
  bool include_ablations = true;
};

struct RunConfig {
  DatasetSpec dataset;
  PipelineConfig pipeline;
  MetricSettings metrics;
  std::string output_dir = "out";
};

nlohmann::json to_json(const ColumnSchema& c);
ColumnSchema column_schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

SurvivalDataset load_dataset(const DatasetSpec& spec);

/// Covariate distances, KM-based survival metrics, and the TSTR table for a
/// (real, synthetic) pair. The real data is re-split with (train_fraction,
/// seed) so the TSTR harness has an original-data reference fit and a held-out
/// test fold; KM and covariate metrics compare against all of `real`.
/// Deterministic for fixed inputs and seed (no timestamps).
nlohmann::json evaluate_datasets(const SurvivalDataset& real,
                                 const SurvivalDataset& synthetic,
                                 const MetricSettings& settings, int seed);

/// Temp-file-plus-rename write; the destination never holds partial content.
void write_text_atomic(const std::string& path, const std::string& content);

/// Whole command-line surface (train / generate / evaluate / benchmark /
/// plot-km); returns the process exit code. Failures print a machine-readable
/// error JSON on stdout and return nonzero.
int run_cli(int argc, const char* const* argv);

}  // namespace survgen
