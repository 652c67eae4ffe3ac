#include "survgen/gan.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace survgen {

using ad::Var;

std::string to_string(SamplerMode m) {
  switch (m) {
    case SamplerMode::full: return "full";
    case SamplerMode::censoring_only: return "censoring_only";
    case SamplerMode::uniform: return "uniform";
  }
  throw std::logic_error("unknown sampler mode");
}

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "full") return SamplerMode::full;
  if (s == "censoring_only") return SamplerMode::censoring_only;
  if (s == "uniform") return SamplerMode::uniform;
  throw std::invalid_argument("unknown sampler mode '" + s + "'");
}

namespace {

std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
}

std::vector<double> cdf_of(const std::vector<double>& probs) {
  std::vector<double> cdf(probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    cdf[i] = acc;
  }
  if (!cdf.empty()) cdf.back() = 1.0;
  return cdf;
}

}  // namespace

ImbalancedSampler ImbalancedSampler::fit(const Codec& codec,
                                         const SurvivalDataset& train,
                                         SamplerMode mode) {
  if (train.size() == 0)
    throw std::invalid_argument("ImbalancedSampler: empty training set");

  ImbalancedSampler s;
  s.mode_ = mode;
  s.time_bins_ = codec.config().time_bins;

  std::map<ConditionCell, double> cell_counts;
  std::map<std::vector<int>, double> tuple_counts;
  double events = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const ConditionCell cell =
        codec.cell_of(train.covariates[i], train.times[i], train.events[i]);
    cell_counts[cell] += 1.0;
    tuple_counts[cell.feature_classes] += 1.0;
    events += train.events[i];
  }
  const double n = static_cast<double>(train.size());
  s.p_event_ = events / n;

  for (auto& [cell, count] : cell_counts) {
    s.cells_.push_back(cell);
    s.probs_.push_back(mode == SamplerMode::uniform ? 1.0 / cell_counts.size()
                                                    : count / n);
  }
  s.cdf_ = cdf_of(s.probs_);

  for (auto& [tuple, count] : tuple_counts) {
    s.feature_tuples_.push_back(tuple);
    s.feature_probs_.push_back(count / n);
  }
  s.feature_cdf_ = cdf_of(s.feature_probs_);
  return s;
}

ConditionCell ImbalancedSampler::sample(Rng& rng) const {
  if (cells_.empty()) throw std::logic_error("sampler not fitted");
  switch (mode_) {
    case SamplerMode::full:
      return cells_[sample_cdf(cdf_, rng)];
    case SamplerMode::uniform:
      return cells_[rng.below(cells_.size())];
    case SamplerMode::censoring_only: {
      ConditionCell cell;
      cell.feature_classes = feature_tuples_[sample_cdf(feature_cdf_, rng)];
      cell.time_bin = static_cast<int>(rng.below(static_cast<std::size_t>(time_bins_)));
      cell.e = rng.uniform() < p_event_ ? 1 : 0;
      return cell;
    }
  }
  throw std::logic_error("unknown sampler mode");
}

nlohmann::json ImbalancedSampler::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : cells_)
    cells.push_back({{"classes", c.feature_classes},
                     {"time_bin", c.time_bin},
                     {"e", c.e}});
  return nlohmann::json{{"mode", to_string(mode_)},
                        {"cells", cells},
                        {"probs", probs_},
                        {"feature_tuples", feature_tuples_},
                        {"feature_probs", feature_probs_},
                        {"p_event", p_event_},
                        {"time_bins", time_bins_}};
}

ImbalancedSampler ImbalancedSampler::from_json(const nlohmann::json& j) {
  ImbalancedSampler s;
  s.mode_ = sampler_mode_from_string(j.at("mode").get<std::string>());
  for (const auto& cj : j.at("cells")) {
    ConditionCell c;
    c.feature_classes = cj.at("classes").get<std::vector<int>>();
    c.time_bin = cj.at("time_bin").get<int>();
    c.e = cj.at("e").get<int>();
    s.cells_.push_back(std::move(c));
  }
  s.probs_ = j.at("probs").get<std::vector<double>>();
  s.cdf_ = cdf_of(s.probs_);
  s.feature_tuples_ = j.at("feature_tuples").get<std::vector<std::vector<int>>>();
  s.feature_probs_ = j.at("feature_probs").get<std::vector<double>>();
  s.feature_cdf_ = cdf_of(s.feature_probs_);
  s.p_event_ = j.at("p_event").get<double>();
  s.time_bins_ = j.at("time_bins").get<int>();
  return s;
}

namespace {

Var join_cond(const Var& cond, const Var& x) {
  if (!cond.defined() || cond.cols() == 0) return x;
  return ad::hconcat(cond, x);
}

Var apply_output_heads(const Var& raw, const std::vector<SlotBlock>& blocks) {
  Var out;
  for (const SlotBlock& b : blocks) {
    Var part = ad::slice_cols(raw, static_cast<Eigen::Index>(b.offset),
                              static_cast<Eigen::Index>(b.size));
    if (b.onehot) part = ad::softmax_rows(part);
    out = out.defined() ? ad::hconcat(out, part) : part;
  }
  return out;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

Var Gan::generator_forward(const Var& cond, const Var& z, bool training,
                           Rng* rng) const {
  const Var raw = generator.forward(join_cond(cond, z), training, rng);
  return apply_output_heads(raw, data_blocks);
}

Var Gan::discriminator_forward(const Var& cond, const Var& x, bool training,
                               Rng* rng) const {
  return discriminator.forward(join_cond(cond, x), training, rng);
}

Eigen::MatrixXd Gan::generate(const Eigen::MatrixXd& conditions, Rng& rng) const {
  const Eigen::Index n = conditions.rows();
  if (cond_dim > 0 && conditions.cols() != cond_dim)
    throw std::invalid_argument("generate: condition width mismatch");
  if (n == 0) return Eigen::MatrixXd(0, data_dim);
  const Var cond = ad::constant(conditions);
  const Var z = ad::constant(gaussian_matrix(n, config.latent_dim, rng));
  return generator_forward(cond, z, /*training=*/false, nullptr).value();
}

Var gradient_penalty(const nn::Mlp& disc, const Var& cond, const Var& x,
                     bool training, Rng* rng) {
  if (!x.requires_grad())
    throw std::invalid_argument("gradient_penalty: x must require grad");
  const Var out = disc.forward(join_cond(cond, x), training, rng);
  const ad::Gradients in_grads = ad::backward(ad::sum_all(out));
  const Var gx = in_grads.at(x);
  const Var norms = ad::sqrt(ad::add_scalar(ad::row_sum(ad::square(gx)), 1e-12));
  return ad::mean_all(ad::square(ad::add_scalar(norms, -1.0)));
}

GanTrainResult train_gan(const Eigen::MatrixXd& encoded,
                         const Eigen::MatrixXd& conditions,
                         const std::vector<SlotBlock>& data_blocks,
                         const GanConfig& config, int seed) {
  const Eigen::Index n = encoded.rows();
  if (n == 0) throw std::invalid_argument("train_gan: empty dataset");
  if (conditions.cols() > 0 && conditions.rows() != n)
    throw std::invalid_argument("train_gan: conditions misaligned");
  if (config.batch_size < 2) throw std::invalid_argument("train_gan: batch < 2");
  if (config.gp_lambda < 0.0) throw std::invalid_argument("train_gan: lambda < 0");

  GanTrainResult result;
  Gan& gan = result.gan;
  gan.config = config;
  gan.cond_dim = static_cast<int>(conditions.cols());
  gan.data_dim = static_cast<int>(encoded.cols());
  gan.data_blocks = data_blocks;

  Rng rng(static_cast<std::uint64_t>(seed));
  Rng init_rng = rng.split(1);

  nn::MlpConfig gcfg;
  gcfg.input_dim = gan.cond_dim + config.latent_dim;
  gcfg.widths = config.gen_hidden;
  gcfg.acts.assign(config.gen_hidden.size(), nn::Activation::tanh);
  gcfg.widths.push_back(gan.data_dim);
  gcfg.acts.push_back(nn::Activation::identity);
  gcfg.dropout = config.gen_dropout;
  gcfg.batch_norm = config.gen_batch_norm;
  gan.generator = nn::Mlp(gcfg, init_rng);

  nn::MlpConfig dcfg;
  dcfg.input_dim = gan.cond_dim + gan.data_dim;
  dcfg.widths = config.disc_hidden;
  dcfg.acts.assign(config.disc_hidden.size(), nn::Activation::leaky_relu);
  dcfg.widths.push_back(1);
  dcfg.acts.push_back(nn::Activation::identity);
  dcfg.dropout = config.disc_dropout;
  dcfg.batch_norm = false;
  gan.discriminator = nn::Mlp(dcfg, init_rng);

  nn::AdamConfig opt{config.lr, 0.9, 0.999, 1e-8, config.weight_decay};
  nn::Adam adam_g(gan.generator.parameters(), opt);
  nn::Adam adam_d(gan.discriminator.parameters(), opt);

  const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n);
  auto draw_batch = [&](Eigen::MatrixXd& x, Eigen::MatrixXd& c) {
    x.resize(b, encoded.cols());
    c.resize(b, conditions.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto r = rng.below(static_cast<std::size_t>(n));
      x.row(i) = encoded.row(static_cast<Eigen::Index>(r));
      if (conditions.cols() > 0)
        c.row(i) = conditions.row(static_cast<Eigen::Index>(r));
    }
  };

  for (int iter = 0; iter < config.iterations; ++iter) {
    try {
      double gp_value = 0.0, d_value = 0.0;
      for (int step = 0; step < std::max(1, config.critic_steps); ++step) {
        Eigen::MatrixXd xb, cb;
        draw_batch(xb, cb);
        const Var cond = ad::constant(cb);
        const Var x_real = ad::constant(xb);
        const Var z = ad::constant(gaussian_matrix(b, config.latent_dim, rng));
        const Var fake =
            gan.generator_forward(cond, z, true, &rng).detach();

        Eigen::MatrixXd mix(b, encoded.cols());
        for (Eigen::Index i = 0; i < b; ++i) {
          const double eps = rng.uniform();
          mix.row(i) =
              eps * xb.row(i) + (1.0 - eps) * fake.value().row(i);
        }
        const Var x_mix = ad::leaf(std::move(mix), true);

        const Var d_real =
            ad::mean_all(gan.discriminator_forward(cond, x_real, true, &rng));
        const Var d_fake =
            ad::mean_all(gan.discriminator_forward(cond, fake, true, &rng));
        const Var gp =
            gradient_penalty(gan.discriminator, cond, x_mix, true, &rng);
        const Var loss_d =
            ad::add(ad::sub(d_fake, d_real), ad::scale(gp, config.gp_lambda));

        adam_d.step(ad::backward(loss_d));
        gp_value = gp.value()(0, 0);
        d_value = loss_d.value()(0, 0);
      }

      Eigen::MatrixXd xb, cb;
      draw_batch(xb, cb);
      const Var cond = ad::constant(cb);
      const Var z = ad::constant(gaussian_matrix(b, config.latent_dim, rng));
      const Var fake = gan.generator_forward(cond, z, true, &rng);
      const Var loss_g =
          ad::neg(ad::mean_all(gan.discriminator_forward(cond, fake, true, &rng)));
      adam_g.step(ad::backward(loss_g));

      result.log.d_loss.push_back(d_value);
      result.log.g_loss.push_back(loss_g.value()(0, 0));
      result.log.gradient_penalty.push_back(gp_value);
    } catch (const ad::finite_error& e) {
      throw std::runtime_error("GAN training diverged at iteration " +
                               std::to_string(iter) + ": " + e.what());
    }
  }
  return result;
}

void GanTrainLog::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << "iteration,d_loss,g_loss,gradient_penalty\n";
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  for (std::size_t i = 0; i < d_loss.size(); ++i)
    out << i << ',' << fmt(d_loss[i]) << ',' << fmt(g_loss[i]) << ','
        << fmt(gradient_penalty[i]) << '\n';
}

namespace {

nlohmann::json blocks_to_json(const std::vector<SlotBlock>& blocks) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : blocks)
    arr.push_back({{"offset", b.offset}, {"size", b.size}, {"onehot", b.onehot}});
  return arr;
}

std::vector<SlotBlock> blocks_from_json(const nlohmann::json& j) {
  std::vector<SlotBlock> blocks;
  for (const auto& bj : j)
    blocks.push_back({bj.at("offset").get<std::size_t>(),
                      bj.at("size").get<std::size_t>(),
                      bj.at("onehot").get<bool>()});
  return blocks;
}

}  // namespace

nlohmann::json Gan::to_json() const {
  return nlohmann::json{
      {"config",
       {{"latent_dim", config.latent_dim},
        {"gen_hidden", config.gen_hidden},
        {"disc_hidden", config.disc_hidden},
        {"gen_dropout", config.gen_dropout},
        {"disc_dropout", config.disc_dropout},
        {"gen_batch_norm", config.gen_batch_norm},
        {"lr", config.lr},
        {"weight_decay", config.weight_decay},
        {"batch_size", config.batch_size},
        {"iterations", config.iterations},
        {"gp_lambda", config.gp_lambda},
        {"critic_steps", config.critic_steps}}},
      {"cond_dim", cond_dim},
      {"data_dim", data_dim},
      {"data_blocks", blocks_to_json(data_blocks)},
      {"generator", generator.to_json()},
      {"discriminator", discriminator.to_json()}};
}

Gan Gan::from_json(const nlohmann::json& j) {
  Gan g;
  const auto& c = j.at("config");
  g.config.latent_dim = c.at("latent_dim").get<int>();
  g.config.gen_hidden = c.at("gen_hidden").get<std::vector<int>>();
  g.config.disc_hidden = c.at("disc_hidden").get<std::vector<int>>();
  g.config.gen_dropout = c.at("gen_dropout").get<double>();
  g.config.disc_dropout = c.at("disc_dropout").get<double>();
  g.config.gen_batch_norm = c.at("gen_batch_norm").get<bool>();
  g.config.lr = c.at("lr").get<double>();
  g.config.weight_decay = c.at("weight_decay").get<double>();
  g.config.batch_size = c.at("batch_size").get<int>();
  g.config.iterations = c.at("iterations").get<int>();
  g.config.gp_lambda = c.at("gp_lambda").get<double>();
  g.config.critic_steps = c.at("critic_steps").get<int>();
  g.cond_dim = j.at("cond_dim").get<int>();
  g.data_dim = j.at("data_dim").get<int>();
  g.data_blocks = blocks_from_json(j.at("data_blocks"));
  g.generator = nn::Mlp::from_json(j.at("generator"));
  g.discriminator = nn::Mlp::from_json(j.at("discriminator"));
  return g;
}

}  // namespace survgen
