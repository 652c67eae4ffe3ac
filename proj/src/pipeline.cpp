#include "survgen/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <utility>

namespace survgen {

namespace {

constexpr std::size_t kGenBatch = 512;

// Re-throws any stage failure with the stage name attached so callers can
// tell which part of the fit went wrong.
template <class F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + " stage failed: " + e.what());
  }
}

int derive_seed(const Rng& root, std::uint64_t stream) {
  return static_cast<int>(root.split(stream).seed() & 0x3fffffffULL);
}

Eigen::RowVectorXd to_row(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(),
                                              static_cast<long>(v.size()));
}

nlohmann::json codec_config_to_json(const CodecConfig& c) {
  return {{"max_components", c.max_components},
          {"time_bins", c.time_bins},
          {"clip", c.clip},
          {"sample_modes", c.sample_modes}};
}

CodecConfig codec_config_from_json(const nlohmann::json& j) {
  CodecConfig c;
  c.max_components = j.at("max_components").get<int>();
  c.time_bins = j.at("time_bins").get<int>();
  c.clip = j.at("clip").get<double>();
  c.sample_modes = j.at("sample_modes").get<bool>();
  return c;
}

nlohmann::json gan_config_to_json(const GanConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"gen_hidden", c.gen_hidden},
          {"disc_hidden", c.disc_hidden},
          {"gen_dropout", c.gen_dropout},
          {"disc_dropout", c.disc_dropout},
          {"gen_batch_norm", c.gen_batch_norm},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"gp_lambda", c.gp_lambda},
          {"critic_steps", c.critic_steps}};
}

GanConfig gan_config_from_json(const nlohmann::json& j) {
  GanConfig c;
  c.latent_dim = j.at("latent_dim").get<int>();
  c.gen_hidden = j.at("gen_hidden").get<std::vector<int>>();
  c.disc_hidden = j.at("disc_hidden").get<std::vector<int>>();
  c.gen_dropout = j.at("gen_dropout").get<double>();
  c.disc_dropout = j.at("disc_dropout").get<double>();
  c.gen_batch_norm = j.at("gen_batch_norm").get<bool>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.iterations = j.at("iterations").get<int>();
  c.gp_lambda = j.at("gp_lambda").get<double>();
  c.critic_steps = j.at("critic_steps").get<int>();
  return c;
}

nlohmann::json survival_config_to_json(const DeepHitConfig& c) {
  return {{"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers},
          {"bins", c.bins},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"lr", c.lr},
          {"alpha", c.alpha},
          {"sigma", c.sigma},
          {"dropout", c.dropout},
          {"batch_norm", c.batch_norm},
          {"val_fraction", c.val_fraction}};
}

DeepHitConfig survival_config_from_json(const nlohmann::json& j) {
  DeepHitConfig c;
  c.hidden_width = j.at("hidden_width").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.bins = j.at("bins").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.lr = j.at("lr").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.val_fraction = j.at("val_fraction").get<double>();
  return c;
}

nlohmann::json regressor_config_to_json(const GbtConfig& c) {
  return {{"n_estimators", c.n_estimators},
          {"max_depth", c.max_depth},
          {"shrinkage", c.shrinkage},
          {"histogram_bins", c.histogram_bins},
          {"min_samples_leaf", c.min_samples_leaf}};
}

GbtConfig regressor_config_from_json(const nlohmann::json& j) {
  GbtConfig c;
  c.n_estimators = j.at("n_estimators").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.shrinkage = j.at("shrinkage").get<double>();
  c.histogram_bins = j.at("histogram_bins").get<int>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  return c;
}

}  // namespace

nlohmann::json to_json(const PipelineConfig& cfg) {
  return {{"codec", codec_config_to_json(cfg.codec)},
          {"gan", gan_config_to_json(cfg.gan)},
          {"survival", survival_config_to_json(cfg.survival)},
          {"regressor", regressor_config_to_json(cfg.regressor)},
          {"sampler_mode", to_string(cfg.sampler_mode)},
          {"no_time_regressor", cfg.no_time_regressor},
          {"no_conditional_gan", cfg.no_conditional_gan}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.codec = codec_config_from_json(j.at("codec"));
  cfg.gan = gan_config_from_json(j.at("gan"));
  cfg.survival = survival_config_from_json(j.at("survival"));
  cfg.regressor = regressor_config_from_json(j.at("regressor"));
  cfg.sampler_mode = sampler_mode_from_string(j.at("sampler_mode").get<std::string>());
  cfg.no_time_regressor = j.at("no_time_regressor").get<bool>();
  cfg.no_conditional_gan = j.at("no_conditional_gan").get<bool>();
  return cfg;
}

Eigen::MatrixXd SurvivalGanModel::encode_dataset(
    const SurvivalDataset& ds) const {
  Eigen::MatrixXd x(static_cast<long>(ds.size()),
                    static_cast<long>(codec_.encoded_dim()));
  for (std::size_t i = 0; i < ds.size(); ++i)
    x.row(static_cast<long>(i)) = to_row(codec_.encode(ds.covariates[i]));
  return x;
}

SurvivalGanModel SurvivalGanModel::fit(const SurvivalDataset& train,
                                       const PipelineConfig& cfg, int seed) {
  train.validate();
  if (train.size() == 0)
    throw std::invalid_argument("fit: training dataset is empty");

  const Rng root(static_cast<std::uint64_t>(seed));
  SurvivalGanModel model;
  model.cfg_ = cfg;
  model.schema_ = train.schema;
  model.time_name_ = train.time_name;
  model.event_name_ = train.event_name;
  model.max_train_time_ = 0.0;
  for (double t : train.times)
    model.max_train_time_ = std::max(model.max_train_time_, t);

  run_stage("codec", [&] {
    model.codec_ = Codec::fit(train, cfg.codec, derive_seed(root, 1));
  });
  std::cerr << "[fit] codec: encoded_dim=" << model.codec_.encoded_dim()
            << " condition_dim=" << model.codec_.condition_dim() << "\n";

  run_stage("sampler", [&] {
    model.sampler_ = ImbalancedSampler::fit(model.codec_, train,
                                            cfg.sampler_mode);
  });
  std::cerr << "[fit] sampler: mode=" << to_string(cfg.sampler_mode)
            << " cells=" << model.sampler_.cells().size()
            << " p_event=" << model.sampler_.event_probability() << "\n";

  Eigen::MatrixXd encoded;
  Eigen::MatrixXd conditions;
  run_stage("encoding", [&] {
    const long n = static_cast<long>(train.size());
    encoded = model.encode_dataset(train);
    const long cond_dim = cfg.no_conditional_gan
                              ? 0
                              : static_cast<long>(model.codec_.condition_dim());
    conditions.resize(n, cond_dim);
    if (cond_dim > 0) {
      for (long i = 0; i < n; ++i) {
        const auto c = model.codec_.class_encode(
            train.covariates[static_cast<std::size_t>(i)],
            train.times[static_cast<std::size_t>(i)],
            train.events[static_cast<std::size_t>(i)]);
        conditions.row(i) = to_row(c);
      }
    }
  });

  run_stage("gan", [&] {
    auto result = train_gan(encoded, conditions, model.codec_.encoded_blocks(),
                            cfg.gan, derive_seed(root, 2));
    model.gan_ = std::move(result.gan);
    model.diag_.gan_log = std::move(result.log);
  });
  if (!model.diag_.gan_log.d_loss.empty())
    std::cerr << "[fit] gan: iterations=" << model.diag_.gan_log.d_loss.size()
              << " final d_loss=" << model.diag_.gan_log.d_loss.back()
              << " g_loss=" << model.diag_.gan_log.g_loss.back() << "\n";

  run_stage("survival_net", [&] {
    const auto grid = HorizonGrid::make(model.codec_.t_min(),
                                        model.codec_.t_max(),
                                        cfg.survival.bins);
    model.survival_ =
        SurvivalNet::train(encoded, train.times, train.events, grid,
                           cfg.survival, derive_seed(root, 3),
                           &model.diag_.survival_val_loss);
  });
  std::cerr << "[fit] survival_net: epochs="
            << model.diag_.survival_val_loss.size() << "\n";

  if (cfg.no_time_regressor) {
    model.has_regressor_ = false;
    std::cerr << "[fit] time_regressor: skipped (curve PMF fallback)\n";
  } else {
    run_stage("time_regressor", [&] {
      const Eigen::MatrixXd curves = model.survival_.predict_curves(encoded);
      model.regressor_ = TimeRegressor::train(encoded, curves, train.times,
                                              train.events, cfg.regressor);
      model.diag_.regressor_train_loss =
          model.regressor_.model().training_loss();
    });
    std::cerr << "[fit] time_regressor: rounds="
              << model.diag_.regressor_train_loss.size() << " final mse="
              << (model.diag_.regressor_train_loss.empty()
                      ? 0.0
                      : model.diag_.regressor_train_loss.back())
              << "\n";
  }
  return model;
}

SurvivalDataset SurvivalGanModel::generate(
    std::size_t m, Rng& rng,
    const std::vector<ConditionCell>* explicit_cells) const {
  if (explicit_cells && explicit_cells->size() != m)
    throw std::invalid_argument(
        "generate: explicit condition list must have exactly one cell per "
        "requested row");

  SurvivalDataset out;
  out.schema = schema_;
  out.time_name = time_name_;
  out.event_name = event_name_;
  out.covariates.reserve(m);
  out.times.reserve(m);
  out.events.reserve(m);

  const double time_cap = 2.0 * max_train_time_;
  const long cond_dim =
      cfg_.no_conditional_gan ? 0 : static_cast<long>(codec_.condition_dim());

  for (std::size_t start = 0; start < m; start += kGenBatch) {
    const std::size_t batch = std::min(kGenBatch, m - start);

    std::vector<ConditionCell> cells(batch);
    for (std::size_t i = 0; i < batch; ++i)
      cells[i] = explicit_cells ? (*explicit_cells)[start + i]
                                : sampler_.sample(rng);

    Eigen::MatrixXd conditions(static_cast<long>(batch), cond_dim);
    if (cond_dim > 0)
      for (std::size_t i = 0; i < batch; ++i)
        conditions.row(static_cast<long>(i)) =
            to_row(codec_.condition_from_cell(cells[i]));

    const Eigen::MatrixXd raw = gan_.generate(conditions, rng);

    // Decode to the original space, then re-encode so the survival net and
    // regressor see the same hard one-hot layout they were trained on.
    Eigen::MatrixXd encoded(static_cast<long>(batch),
                            static_cast<long>(codec_.encoded_dim()));
    std::vector<std::vector<double>> rows(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      const long r = static_cast<long>(i);
      std::vector<double> raw_row(raw.cols());
      for (long c = 0; c < raw.cols(); ++c) raw_row[static_cast<std::size_t>(c)] = raw(r, c);
      rows[i] = codec_.decode(raw_row);
      encoded.row(r) = to_row(codec_.encode(rows[i], &rng));
    }

    const Eigen::MatrixXd curves = survival_.predict_curves(encoded);
    Eigen::MatrixXd pmf;
    const bool use_regressor = has_regressor_ && !cfg_.no_time_regressor;
    if (!use_regressor) pmf = survival_.predict_pmf(encoded);

    for (std::size_t i = 0; i < batch; ++i) {
      const long r = static_cast<long>(i);
      const int e = cells[i].e;
      double t;
      if (use_regressor) {
        t = regressor_.predict_time(encoded.row(r), curves.row(r), e);
      } else {
        // Sample a horizon bin from the curve's implied event-time PMF.
        const double u = rng.uniform();
        double acc = 0.0;
        int bin = survival_.grid().size() - 1;
        for (int b = 0; b < survival_.grid().size(); ++b) {
          acc += pmf(r, b);
          if (u < acc) {
            bin = b;
            break;
          }
        }
        t = survival_.grid().times[static_cast<std::size_t>(bin)];
      }
      if (!std::isfinite(t))
        throw std::runtime_error("generate: non-finite time prediction");
      if (t < 0.0) t = 0.0;
      if (t > time_cap) {
        t = time_cap;
        ++diag_.clamped_times;
      }
      out.covariates.push_back(std::move(rows[i]));
      out.times.push_back(t);
      out.events.push_back(e);
    }
  }

  if (m > 0) out.validate();
  return out;
}

nlohmann::json SurvivalGanModel::to_json() const {
  nlohmann::json j{{"format_version", 1},
                   {"config", survgen::to_json(cfg_)},
                   {"codec", codec_.to_json()},
                   {"sampler", sampler_.to_json()},
                   {"gan", gan_.to_json()},
                   {"survival", survival_.to_json()},
                   {"time_name", time_name_},
                   {"event_name", event_name_},
                   {"max_train_time", max_train_time_}};
  if (has_regressor_) j["regressor"] = regressor_.to_json();
  return j;
}

SurvivalGanModel SurvivalGanModel::from_json(const nlohmann::json& j) {
  SurvivalGanModel m;
  m.cfg_ = pipeline_config_from_json(j.at("config"));
  m.codec_ = Codec::from_json(j.at("codec"));
  m.sampler_ = ImbalancedSampler::from_json(j.at("sampler"));
  m.gan_ = Gan::from_json(j.at("gan"));
  m.survival_ = SurvivalNet::from_json(j.at("survival"));
  if (j.contains("regressor")) {
    m.regressor_ = TimeRegressor::from_json(j.at("regressor"));
    m.has_regressor_ = true;
  } else {
    m.has_regressor_ = false;
  }
  m.schema_ = m.codec_.schema();
  m.time_name_ = j.at("time_name").get<std::string>();
  m.event_name_ = j.at("event_name").get<std::string>();
  m.max_train_time_ = j.at("max_train_time").get<double>();
  return m;
}

void SurvivalGanModel::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
    out << to_json().dump();
    if (!out) throw std::runtime_error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("failed to move " + tmp + " into place");
}

SurvivalGanModel SurvivalGanModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace survgen
