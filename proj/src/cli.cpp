#include "survgen/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <stdexcept>
#include <utility>

#include <CLI11.hpp>

#include "survgen/covariate_metrics.hpp"
#include "survgen/downstream.hpp"
#include "survgen/km.hpp"
#include "survgen/stats.hpp"

namespace survgen {

namespace fs = std::filesystem;

namespace {

nlohmann::json deep_merge(nlohmann::json base, const nlohmann::json& patch) {
  if (!base.is_object() || !patch.is_object()) return patch;
  for (const auto& [key, value] : patch.items())
    base[key] = base.contains(key) ? deep_merge(base[key], value)
                                   : value;
  return base;
}

void atomic_rename(const std::string& tmp, const std::string& path) {
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("failed to move " + tmp + " into place");
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

void write_json_artifact(const std::string& path, const nlohmann::json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

// z-scored continuous columns plus reference-coded categoricals (first
// category dropped so Cox's centered design stays full rank).
struct DownstreamEncoder {
  std::vector<ColumnSchema> schema;
  std::vector<double> mu, sd;
  std::size_t dim = 0;

  static DownstreamEncoder fit(const SurvivalDataset& train) {
    DownstreamEncoder enc;
    enc.schema = train.schema;
    enc.mu.assign(train.schema.size(), 0.0);
    enc.sd.assign(train.schema.size(), 1.0);
    for (std::size_t j = 0; j < train.schema.size(); ++j) {
      if (train.schema[j].kind == ColumnKind::continuous) {
        std::vector<double> col(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) col[i] = train.covariates[i][j];
        enc.mu[j] = mean(col);
        const double s = stddev(col);
        enc.sd[j] = s > 1e-12 ? s : 1.0;
        enc.dim += 1;
      } else {
        enc.dim += train.schema[j].categories.size() - 1;
      }
    }
    return enc;
  }

  Eigen::MatrixXd encode(const SurvivalDataset& ds) const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<long>(ds.size()),
                                              static_cast<long>(dim));
    for (std::size_t i = 0; i < ds.size(); ++i) {
      long c = 0;
      for (std::size_t j = 0; j < schema.size(); ++j) {
        const double v = ds.covariates[i][j];
        if (schema[j].kind == ColumnKind::continuous) {
          x(static_cast<long>(i), c++) = (v - mu[j]) / sd[j];
        } else {
          const auto k = static_cast<long>(schema[j].categories.size()) - 1;
          const auto idx = static_cast<long>(v);
          if (idx > 0) x(static_cast<long>(i), c + idx - 1) = 1.0;
          c += k;
        }
      }
    }
    return x;
  }
};

EncodedSurvival encode_for_downstream(const DownstreamEncoder& enc,
                                      const SurvivalDataset& ds) {
  return EncodedSurvival{enc.encode(ds), ds.times, ds.events};
}

void check_same_schema(const SurvivalDataset& a, const SurvivalDataset& b) {
  if (a.schema.size() != b.schema.size())
    throw std::invalid_argument("real and synthetic schemas differ in width");
  for (std::size_t j = 0; j < a.schema.size(); ++j) {
    if (a.schema[j].name != b.schema[j].name ||
        a.schema[j].kind != b.schema[j].kind ||
        a.schema[j].categories != b.schema[j].categories)
      throw std::invalid_argument("real and synthetic schemas differ at column '" +
                                  a.schema[j].name + "'");
  }
}

// ---------------------------------------------------------------------------
// condition constraints (--condition key=value)

struct Constraint {
  enum class Kind { event, time_bin, feature } kind = Kind::event;
  std::size_t feature = 0;
  int value = 0;
  std::string text;
};

Constraint parse_constraint(const std::string& raw, const Codec& codec,
                            const std::string& event_name) {
  const auto eq = raw.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == raw.size())
    throw std::invalid_argument("condition '" + raw + "' is not key=value");
  const std::string key = raw.substr(0, eq);
  const std::string value = raw.substr(eq + 1);

  Constraint c;
  c.text = raw;
  if (key == "event" || key == "E" || key == event_name) {
    c.kind = Constraint::Kind::event;
    if (value != "0" && value != "1")
      throw std::invalid_argument("condition '" + raw + "': event must be 0 or 1");
    c.value = value == "1" ? 1 : 0;
    return c;
  }
  if (key == "time_bin") {
    c.kind = Constraint::Kind::time_bin;
    c.value = std::stoi(value);
    if (c.value < 0 || c.value >= codec.config().time_bins)
      throw std::invalid_argument("condition '" + raw + "': time_bin out of range");
    return c;
  }
  for (std::size_t j = 0; j < codec.schema().size(); ++j) {
    const auto& col = codec.schema()[j];
    if (col.name != key) continue;
    c.kind = Constraint::Kind::feature;
    c.feature = j;
    if (col.kind == ColumnKind::categorical) {
      const auto it = std::find(col.categories.begin(), col.categories.end(), value);
      if (it != col.categories.end()) {
        c.value = static_cast<int>(it - col.categories.begin());
        return c;
      }
    }
    // continuous features (and categorical fallback): numeric class index
    try {
      c.value = std::stoi(value);
    } catch (const std::exception&) {
      throw std::invalid_argument("condition '" + raw + "': unknown value '" +
                                  value + "' for column '" + key + "'");
    }
    const int limit = col.kind == ColumnKind::categorical
                          ? static_cast<int>(col.categories.size())
                          : static_cast<int>(codec.gmms()[j].components());
    if (c.value < 0 || c.value >= limit)
      throw std::invalid_argument("condition '" + raw + "': class index out of range");
    return c;
  }
  throw std::invalid_argument("condition '" + raw + "': no column named '" + key + "'");
}

bool matches(const ConditionCell& cell, const Constraint& c) {
  switch (c.kind) {
    case Constraint::Kind::event:
      return cell.e == c.value;
    case Constraint::Kind::time_bin:
      return cell.time_bin == c.value;
    case Constraint::Kind::feature:
      return cell.feature_classes[c.feature] == c.value;
  }
  return false;
}

// Restricts the sampler's observed cells to those matching every constraint,
// renormalizes, and draws one cell per requested row.
std::vector<ConditionCell> sample_constrained_cells(
    const SurvivalGanModel& model, const std::vector<std::string>& raw,
    std::size_t rows, Rng& rng) {
  std::vector<Constraint> constraints;
  constraints.reserve(raw.size());
  for (const auto& r : raw)
    constraints.push_back(parse_constraint(r, model.codec(), "event"));

  const auto& cells = model.sampler().cells();
  const auto& probs = model.sampler().probabilities();
  std::vector<const ConditionCell*> kept;
  std::vector<double> weight;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const bool ok = std::all_of(constraints.begin(), constraints.end(),
                                [&](const Constraint& c) { return matches(cells[i], c); });
    if (ok) {
      kept.push_back(&cells[i]);
      weight.push_back(probs[i]);
    }
  }
  if (kept.empty())
    throw std::runtime_error("no observed condition cells match the requested conditions");

  double total = 0.0;
  for (double w : weight) total += w;
  std::vector<double> cdf(weight.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    acc += weight[i] / total;
    cdf[i] = acc;
  }
  cdf.back() = 1.0;

  std::vector<ConditionCell> out;
  out.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double u = rng.uniform();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    out.push_back(*kept[static_cast<std::size_t>(it - cdf.begin())]);
  }
  return out;
}

PipelineConfig apply_ablation(PipelineConfig cfg, const std::string& ablation) {
  if (ablation.empty()) return cfg;
  if (ablation == "no-time-regressor") {
    cfg.no_time_regressor = true;
  } else if (ablation == "no-imbalanced-sampling") {
    cfg.sampler_mode = SamplerMode::uniform;
  } else if (ablation == "censoring-only-sampling") {
    cfg.sampler_mode = SamplerMode::censoring_only;
  } else if (ablation == "no-conditional-gan") {
    cfg.no_conditional_gan = true;
  } else {
    throw std::invalid_argument(
        "unknown ablation '" + ablation +
        "' (expected no-time-regressor, no-imbalanced-sampling, "
        "censoring-only-sampling or no-conditional-gan)");
  }
  return cfg;
}

}  // namespace

nlohmann::json to_json(const ColumnSchema& c) {
  nlohmann::json j{{"name", c.name},
                   {"kind", c.kind == ColumnKind::continuous ? "continuous"
                                                             : "categorical"}};
  if (c.kind == ColumnKind::categorical) j["categories"] = c.categories;
  return j;
}

ColumnSchema column_schema_from_json(const nlohmann::json& j) {
  ColumnSchema c;
  c.name = j.at("name").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "continuous") {
    c.kind = ColumnKind::continuous;
  } else if (kind == "categorical") {
    c.kind = ColumnKind::categorical;
    c.categories = j.at("categories").get<std::vector<std::string>>();
  } else {
    throw std::invalid_argument("column '" + c.name + "': unknown kind '" + kind + "'");
  }
  return c;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json schema = nlohmann::json::array();
  for (const auto& c : cfg.dataset.schema) schema.push_back(to_json(c));
  return {{"dataset",
           {{"path", cfg.dataset.path},
            {"time_column", cfg.dataset.time_column},
            {"event_column", cfg.dataset.event_column},
            {"schema", schema}}},
          {"pipeline", to_json(cfg.pipeline)},
          {"metrics",
           {{"horizons", cfg.metrics.horizons},
            {"seeds", cfg.metrics.seeds},
            {"train_fraction", cfg.metrics.train_fraction},
            {"synthetic_rows", cfg.metrics.synthetic_rows},
            {"include_ablations", cfg.metrics.include_ablations}}},
          {"output_dir", cfg.output_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  const auto& d = j.at("dataset");
  cfg.dataset.path = d.at("path").get<std::string>();
  cfg.dataset.time_column = d.value("time_column", std::string("time"));
  cfg.dataset.event_column = d.value("event_column", std::string("event"));
  for (const auto& col : d.at("schema"))
    cfg.dataset.schema.push_back(column_schema_from_json(col));
  if (cfg.dataset.schema.empty())
    throw std::invalid_argument("config: dataset.schema is empty");

  // Partial pipeline configs are overlaid on the shipped defaults.
  nlohmann::json pipeline = to_json(PipelineConfig{});
  if (j.contains("pipeline")) pipeline = deep_merge(pipeline, j.at("pipeline"));
  cfg.pipeline = pipeline_config_from_json(pipeline);

  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    cfg.metrics.horizons = m.value("horizons", cfg.metrics.horizons);
    cfg.metrics.seeds = m.value("seeds", cfg.metrics.seeds);
    cfg.metrics.train_fraction = m.value("train_fraction", cfg.metrics.train_fraction);
    cfg.metrics.synthetic_rows = m.value("synthetic_rows", cfg.metrics.synthetic_rows);
    cfg.metrics.include_ablations =
        m.value("include_ablations", cfg.metrics.include_ablations);
  }
  if (cfg.metrics.seeds.empty())
    throw std::invalid_argument("config: metrics.seeds must not be empty");
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

SurvivalDataset load_dataset(const DatasetSpec& spec) {
  return load_csv(spec.path, spec.schema, spec.time_column, spec.event_column);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  atomic_rename(tmp, path);
}

nlohmann::json evaluate_datasets(const SurvivalDataset& real,
                                 const SurvivalDataset& synthetic,
                                 const MetricSettings& settings, int seed) {
  real.validate();
  synthetic.validate();
  check_same_schema(real, synthetic);

  const auto dist = covariate_distances(real, synthetic);
  const auto km_real = kaplan_meier(real.times, real.events);
  const auto km_syn = kaplan_meier(synthetic.times, synthetic.events);

  SplitSpec sp;
  sp.train_fraction = settings.train_fraction;
  sp.seed = static_cast<std::uint64_t>(seed);
  const auto [real_train, real_test] = split(real, sp);

  const auto enc = DownstreamEncoder::fit(real_train);
  const auto es_train = encode_for_downstream(enc, real_train);
  const auto es_test = encode_for_downstream(enc, real_test);
  const auto es_syn = encode_for_downstream(enc, synthetic);

  const auto [t_lo, t_hi] =
      std::minmax_element(real_train.times.begin(), real_train.times.end());
  const auto horizons = evaluation_horizons(*t_lo, *t_hi, settings.horizons);

  std::vector<std::shared_ptr<DownstreamModel>> models{
      std::make_shared<CoxDownstream>(), std::make_shared<HazardNetDownstream>()};
  const auto report = tstr(es_train, es_test, es_syn, models, horizons, seed);

  nlohmann::json per_feature{{"features", dist.feature_names},
                             {"jsd", dist.jsd},
                             {"wasserstein", dist.w1}};
  return nlohmann::json{
      {"optimism", optimism(km_syn, km_real)},
      {"short_sightedness", short_sightedness(km_syn, km_real)},
      {"short_sightedness_signed", short_sightedness(km_syn, km_real, true)},
      {"km_divergence", km_divergence(km_syn, km_real)},
      {"jsd", dist.mean_jsd},
      {"wasserstein", dist.mean_w1},
      {"covariates", per_feature},
      {"survival_curves",
       {{"real_end_time", km_real.end_time},
        {"synthetic_end_time", km_syn.end_time}}},
      {"rows", {{"real", real.size()}, {"synthetic", synthetic.size()}}},
      {"tstr", report.to_json()}};
}

namespace {

// Best non-failed synthetic-trained downstream results; NaN when every model
// failed on that source.
double best_tstr(const nlohmann::json& tstr_json, const std::string& source,
                 const std::string& field, bool maximize) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& e : tstr_json.at("entries")) {
    if (e.at("source").get<std::string>() != source || e.at("failed").get<bool>())
      continue;
    const double v = e.at(field).get<double>();
    if (std::isnan(best) || (maximize ? v > best : v < best)) best = v;
  }
  return best;
}

std::map<std::string, double> scalar_metrics(const nlohmann::json& m) {
  std::map<std::string, double> out;
  for (const char* k : {"optimism", "short_sightedness", "km_divergence",
                        "jsd", "wasserstein"})
    out[k] = m.at(k).get<double>();
  out["tstr_cindex_synthetic"] = best_tstr(m.at("tstr"), "synthetic", "mean_cindex", true);
  out["tstr_cindex_original"] = best_tstr(m.at("tstr"), "original", "mean_cindex", true);
  out["tstr_brier_synthetic"] = best_tstr(m.at("tstr"), "synthetic", "mean_brier", false);
  out["tstr_brier_original"] = best_tstr(m.at("tstr"), "original", "mean_brier", false);
  return out;
}

// ---------------------------------------------------------------------------
// commands

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  int seed = 0;
  bool seed_given = false;
};

int resolve_seed(const CommonArgs& args, const RunConfig& cfg) {
  if (args.seed_given) return args.seed;
  return cfg.metrics.seeds.front();
}

void cmd_train(const CommonArgs& args, const std::string& ablation) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = load_run_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  const int seed = resolve_seed(args, cfg);
  cfg.pipeline = apply_ablation(cfg.pipeline, ablation);

  const auto train = load_dataset(cfg.dataset);
  std::cerr << "[train] dataset: " << train.size() << " rows, "
            << train.num_features() << " features\n";
  const auto model = SurvivalGanModel::fit(train, cfg.pipeline, seed);

  fs::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir;
  model.save(dir + "/model.json");

  nlohmann::json snapshot = to_json(cfg);
  snapshot["seed"] = seed;
  snapshot["ablation"] = ablation;
  write_json_artifact(dir + "/config.json", snapshot);

  model.diagnostics().gan_log.write_csv(dir + "/gan_training.csv.tmp");
  atomic_rename(dir + "/gan_training.csv.tmp", dir + "/gan_training.csv");

  write_json_artifact(dir + "/run_meta.json",
                      {{"command", "train"},
                       {"seed", seed},
                       {"ablation", ablation},
                       {"rows", train.size()},
                       {"duration_seconds", elapsed_seconds(start)}});
  std::cerr << "[train] checkpoint written to " << dir << "/model.json\n";
}

void cmd_generate(const std::string& checkpoint, std::size_t rows, int seed,
                  const std::string& out_csv,
                  const std::vector<std::string>& conditions) {
  const auto model = SurvivalGanModel::load(checkpoint);
  Rng rng(static_cast<std::uint64_t>(seed));

  SurvivalDataset syn;
  if (conditions.empty()) {
    syn = model.generate(rows, rng);
  } else {
    const auto cells = sample_constrained_cells(model, conditions, rows, rng);
    syn = model.generate(rows, rng, &cells);
  }

  write_csv(syn, out_csv + ".tmp");
  atomic_rename(out_csv + ".tmp", out_csv);
  std::cerr << "[generate] wrote " << syn.size() << " rows to " << out_csv << "\n";
}

void cmd_evaluate(const CommonArgs& args, const std::string& real_path,
                  const std::string& syn_path) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = load_run_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  const int seed = resolve_seed(args, cfg);

  DatasetSpec real_spec = cfg.dataset;
  if (!real_path.empty()) real_spec.path = real_path;
  const auto real = load_dataset(real_spec);
  DatasetSpec syn_spec = cfg.dataset;
  syn_spec.path = syn_path;
  const auto synthetic = load_dataset(syn_spec);

  const auto metrics = evaluate_datasets(real, synthetic, cfg.metrics, seed);

  fs::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir;
  write_json_artifact(dir + "/metrics.json", metrics);

  const auto km_real = kaplan_meier(real.times, real.events);
  const auto km_syn = kaplan_meier(synthetic.times, synthetic.events);
  write_text_atomic(dir + "/km.svg", km_plot_svg(km_real, km_syn));
  write_curve_csv(km_real, dir + "/km_real.csv.tmp");
  atomic_rename(dir + "/km_real.csv.tmp", dir + "/km_real.csv");
  write_curve_csv(km_syn, dir + "/km_synthetic.csv.tmp");
  atomic_rename(dir + "/km_synthetic.csv.tmp", dir + "/km_synthetic.csv");

  write_json_artifact(dir + "/run_meta.json",
                      {{"command", "evaluate"},
                       {"seed", seed},
                       {"duration_seconds", elapsed_seconds(start)}});
  std::cerr << "[evaluate] metrics written to " << dir << "/metrics.json\n";
}

void cmd_benchmark(const CommonArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = load_run_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  const auto real = load_dataset(cfg.dataset);

  std::vector<std::pair<std::string, PipelineConfig>> variants{
      {"survival_gan", cfg.pipeline}};
  if (cfg.metrics.include_ablations) {
    variants.emplace_back("no_time_regressor",
                          apply_ablation(cfg.pipeline, "no-time-regressor"));
    variants.emplace_back("no_imbalanced_sampling",
                          apply_ablation(cfg.pipeline, "no-imbalanced-sampling"));
    variants.emplace_back("censoring_only_sampling",
                          apply_ablation(cfg.pipeline, "censoring-only-sampling"));
    variants.emplace_back("no_conditional_gan",
                          apply_ablation(cfg.pipeline, "no-conditional-gan"));
  }

  fs::create_directories(cfg.output_dir);
  nlohmann::json report{{"seeds", cfg.metrics.seeds},
                        {"variants", nlohmann::json::object()}};

  for (const auto& [name, pipeline_cfg] : variants) {
    nlohmann::json per_seed = nlohmann::json::array();
    std::map<std::string, std::vector<double>> collected;

    for (int seed : cfg.metrics.seeds) {
      std::cerr << "[benchmark] variant=" << name << " seed=" << seed << "\n";
      try {
        SplitSpec sp;
        sp.train_fraction = cfg.metrics.train_fraction;
        sp.seed = static_cast<std::uint64_t>(seed);
        const auto [train, test] = split(real, sp);

        const auto model = SurvivalGanModel::fit(train, pipeline_cfg, seed);
        Rng gen_rng = Rng(static_cast<std::uint64_t>(seed)).split(77);
        const std::size_t rows = cfg.metrics.synthetic_rows
                                     ? cfg.metrics.synthetic_rows
                                     : train.size();
        const auto synthetic = model.generate(rows, gen_rng);
        const auto metrics = evaluate_datasets(real, synthetic, cfg.metrics, seed);

        const std::string seed_dir =
            cfg.output_dir + "/" + name + "/seed_" + std::to_string(seed);
        fs::create_directories(seed_dir);
        write_json_artifact(seed_dir + "/metrics.json", metrics);

        for (const auto& [k, v] : scalar_metrics(metrics))
          if (!std::isnan(v)) collected[k].push_back(v);
        per_seed.push_back({{"seed", seed}, {"metrics", metrics}});
      } catch (const std::exception& e) {
        std::cerr << "[benchmark] variant=" << name << " seed=" << seed
                  << " failed: " << e.what() << "\n";
        per_seed.push_back({{"seed", seed}, {"failed", true}, {"error", e.what()}});
      }
    }

    nlohmann::json aggregate = nlohmann::json::object();
    for (const auto& [k, values] : collected)
      aggregate[k] = {{"mean", mean(values)},
                      {"std", stddev(values)},
                      {"n", values.size()},
                      {"values", values}};
    report["variants"][name] = {{"per_seed", per_seed}, {"aggregate", aggregate}};
  }

  nlohmann::json snapshot = to_json(cfg);
  write_json_artifact(cfg.output_dir + "/config.json", snapshot);
  write_json_artifact(cfg.output_dir + "/benchmark.json", report);
  write_json_artifact(cfg.output_dir + "/run_meta.json",
                      {{"command", "benchmark"},
                       {"duration_seconds", elapsed_seconds(start)}});
  std::cerr << "[benchmark] report written to " << cfg.output_dir
            << "/benchmark.json\n";
}

void cmd_plot_km(const CommonArgs& args, const std::string& real_path,
                 const std::string& syn_path, const std::string& out_svg) {
  const RunConfig cfg = load_run_config(args.config_path);
  DatasetSpec real_spec = cfg.dataset;
  if (!real_path.empty()) real_spec.path = real_path;
  const auto real = load_dataset(real_spec);
  DatasetSpec syn_spec = cfg.dataset;
  syn_spec.path = syn_path;
  const auto synthetic = load_dataset(syn_spec);

  const auto km_real = kaplan_meier(real.times, real.events);
  const auto km_syn = kaplan_meier(synthetic.times, synthetic.events);

  if (out_svg.find('/') != std::string::npos)
    fs::create_directories(fs::path(out_svg).parent_path());
  write_text_atomic(out_svg, km_plot_svg(km_real, km_syn));

  std::string stem = out_svg;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".svg")
    stem = stem.substr(0, stem.size() - 4);
  write_curve_csv(km_real, stem + "_real.csv.tmp");
  atomic_rename(stem + "_real.csv.tmp", stem + "_real.csv");
  write_curve_csv(km_syn, stem + "_synthetic.csv.tmp");
  atomic_rename(stem + "_synthetic.csv.tmp", stem + "_synthetic.csv");
  std::cerr << "[plot-km] wrote " << out_svg << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"SurvivalGAN-style synthetic survival data toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, bench_args, plot_args;
  std::string ablation;
  auto* train = app.add_subcommand("train", "Fit the generative model");
  train->add_option("--config", train_args.config_path, "Run config JSON")->required();
  auto* train_seed = train->add_option("--seed", train_args.seed, "RNG seed");
  train->add_option("--out", train_args.out_override, "Output directory");
  train->add_option("--ablation", ablation,
                    "no-time-regressor | no-imbalanced-sampling | "
                    "censoring-only-sampling | no-conditional-gan");

  std::string checkpoint, gen_out = "synthetic.csv";
  std::size_t rows = 1000;
  int gen_seed = 0;
  std::vector<std::string> conditions;
  auto* generate = app.add_subcommand("generate", "Sample synthetic rows");
  generate->add_option("--checkpoint", checkpoint, "model.json from train")->required();
  generate->add_option("--rows", rows, "Rows to generate");
  generate->add_option("--seed", gen_seed, "RNG seed");
  generate->add_option("--out", gen_out, "Output CSV path");
  generate->add_option("--condition", conditions,
                       "key=value constraint on sampled condition cells "
                       "(repeatable; e.g. event=1, time_bin=3, sex=female)");

  std::string eval_real, eval_syn;
  auto* evaluate = app.add_subcommand("evaluate", "Score synthetic against real");
  evaluate->add_option("--config", eval_args.config_path, "Run config JSON")->required();
  evaluate->add_option("--real", eval_real, "Real CSV (default: config dataset)");
  evaluate->add_option("--synthetic", eval_syn, "Synthetic CSV")->required();
  auto* eval_seed = evaluate->add_option("--seed", eval_args.seed, "RNG seed");
  evaluate->add_option("--out", eval_args.out_override, "Output directory");

  auto* benchmark = app.add_subcommand(
      "benchmark", "Multi-seed train/generate/evaluate incl. ablations");
  benchmark->add_option("--config", bench_args.config_path, "Run config JSON")->required();
  benchmark->add_option("--out", bench_args.out_override, "Output directory");

  std::string plot_real, plot_syn, plot_out = "km.svg";
  auto* plot = app.add_subcommand("plot-km", "Kaplan-Meier comparison plot");
  plot->add_option("--config", plot_args.config_path, "Run config JSON")->required();
  plot->add_option("--real", plot_real, "Real CSV (default: config dataset)");
  plot->add_option("--synthetic", plot_syn, "Synthetic CSV")->required();
  plot->add_option("--out", plot_out, "Output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0)
      std::cout << nlohmann::json{{"error",
                                   {{"command", "usage"}, {"message", e.what()}}}}
                       .dump()
                << "\n";
    return app.exit(e);
  }

  std::string active = "unknown";
  try {
    if (app.got_subcommand(train)) {
      active = "train";
      train_args.seed_given = train_seed->count() > 0;
      cmd_train(train_args, ablation);
    } else if (app.got_subcommand(generate)) {
      active = "generate";
      cmd_generate(checkpoint, rows, gen_seed, gen_out, conditions);
    } else if (app.got_subcommand(evaluate)) {
      active = "evaluate";
      eval_args.seed_given = eval_seed->count() > 0;
      cmd_evaluate(eval_args, eval_real, eval_syn);
    } else if (app.got_subcommand(benchmark)) {
      active = "benchmark";
      cmd_benchmark(bench_args);
    } else if (app.got_subcommand(plot)) {
      active = "plot-km";
      cmd_plot_km(plot_args, plot_real, plot_syn, plot_out);
    }
  } catch (const std::exception& e) {
    std::cout << nlohmann::json{{"error",
                                 {{"command", active}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}

}  // namespace survgen
