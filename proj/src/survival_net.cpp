#include "survgen/survival_net.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace survgen {

using ad::Var;

namespace {
constexpr double kLogEps = 1e-8;
}

HorizonGrid HorizonGrid::make(double t_min, double t_max, int n) {
  if (n < 2) throw std::invalid_argument("HorizonGrid: need at least 2 horizons");
  if (!(t_max > t_min))
    throw std::invalid_argument("HorizonGrid: degenerate time range");
  HorizonGrid g;
  g.times.resize(n);
  for (int i = 0; i < n; ++i)
    g.times[i] = t_min + (t_max - t_min) * i / (n - 1);
  return g;
}

int HorizonGrid::bin_of(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  return static_cast<int>(it - times.begin()) - 1;
}

Var SurvivalNet::loss(const Var& logits, const std::vector<int>& bins,
                      const std::vector<int>& events,
                      const std::vector<double>& times, double alpha,
                      double sigma) {
  const Eigen::Index b = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<Eigen::Index>(bins.size()) != b || events.size() != bins.size() ||
      times.size() != bins.size())
    throw std::invalid_argument("survival loss: misaligned inputs");
  if (sigma <= 0.0) throw std::invalid_argument("survival loss: sigma <= 0");

  const Var f = ad::softmax_rows(logits);

  // log-likelihood: events take their own bin's mass, censored subjects the
  // tail strictly after their bin
  Eigen::MatrixXd pick = Eigen::MatrixXd::Zero(b, k);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (events[i] == 1) {
      pick(i, bins[i]) = 1.0;
    } else {
      for (Eigen::Index j = bins[i] + 1; j < k; ++j) pick(i, j) = 1.0;
    }
  }
  const Var prob = ad::row_sum(ad::mul(f, ad::constant(std::move(pick))));
  const Var ll = ad::neg(ad::mean_all(ad::log(ad::add_scalar(prob, kLogEps))));
  if (alpha == 0.0) return ll;

  // ranking: for pairs (i event, t_i < t_j) compare cumulative incidence at
  // subject i's bin
  Eigen::MatrixXd pair_mask = Eigen::MatrixXd::Zero(b, b);
  double n_pairs = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    if (events[i] != 1) continue;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (times[i] < times[j]) {
        pair_mask(i, j) = 1.0;
        n_pairs += 1.0;
      }
    }
  }
  if (n_pairs == 0.0) return ll;

  Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(k, b);  // sel(bin_c, c) = 1
  for (Eigen::Index c = 0; c < b; ++c) sel(bins[c], c) = 1.0;

  const Var cif = ad::cumsum_rows(f);                    // b x k
  const Var m = ad::matmul(cif, ad::constant(std::move(sel)));  // m(r,c) = F_r(bin_c)
  const Var diag = ad::row_sum(ad::mul(m, ad::constant(Eigen::MatrixXd(
                       Eigen::MatrixXd::Identity(b, b)))));     // F_i(bin_i)
  // p(i,j) = F_i(bin_i) - F_j(bin_i)
  const Var p = ad::sub(ad::tile_cols(diag, b), ad::transpose(m));
  const Var kernel = ad::exp(ad::scale(p, -1.0 / sigma));
  const Var rank = ad::scale(
      ad::sum_all(ad::mul(kernel, ad::constant(std::move(pair_mask)))),
      1.0 / n_pairs);
  return ad::add(ll, ad::scale(rank, alpha));
}

SurvivalNet SurvivalNet::train(const Eigen::MatrixXd& encoded,
                               const std::vector<double>& times,
                               const std::vector<int>& events,
                               const HorizonGrid& grid, const DeepHitConfig& cfg,
                               int seed, std::vector<double>* val_history) {
  const Eigen::Index n = encoded.rows();
  if (n == 0) throw std::invalid_argument("SurvivalNet: empty dataset");
  if (static_cast<std::size_t>(n) != times.size() || times.size() != events.size())
    throw std::invalid_argument("SurvivalNet: misaligned inputs");
  if (grid.size() != cfg.bins)
    throw std::invalid_argument("SurvivalNet: grid size differs from config bins");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw std::invalid_argument("SurvivalNet: alpha outside [0,1]");

  if (std::none_of(events.begin(), events.end(), [](int e) { return e == 1; }))
    std::cerr << "warning: survival net trained on a dataset with no events\n";

  SurvivalNet model;
  model.grid_ = grid;
  model.cfg_ = cfg;

  Rng rng(static_cast<std::uint64_t>(seed));
  Rng init_rng = rng.split(1);

  nn::MlpConfig mcfg;
  mcfg.input_dim = static_cast<int>(encoded.cols());
  mcfg.widths.assign(cfg.hidden_layers, cfg.hidden_width);
  mcfg.acts.assign(cfg.hidden_layers, nn::Activation::relu);
  mcfg.widths.push_back(cfg.bins);
  mcfg.acts.push_back(nn::Activation::identity);
  mcfg.dropout = cfg.dropout;
  mcfg.batch_norm = cfg.batch_norm;
  model.net_ = nn::Mlp(mcfg, init_rng);

  std::vector<int> bins(n);
  for (Eigen::Index i = 0; i < n; ++i) bins[i] = grid.bin_of(times[i]);

  // seeded validation split for early stopping
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
  const bool early_stop = n_val > 0 && n_val < static_cast<std::size_t>(n);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + (early_stop ? n_val : 0));
  std::vector<std::size_t> train_idx(order.begin() + (early_stop ? n_val : 0), order.end());

  auto gather = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& x,
                    std::vector<int>& bi, std::vector<int>& ev,
                    std::vector<double>& ti) {
    x.resize(static_cast<Eigen::Index>(idx.size()), encoded.cols());
    bi.resize(idx.size());
    ev.resize(idx.size());
    ti.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = encoded.row(static_cast<Eigen::Index>(idx[i]));
      bi[i] = bins[idx[i]];
      ev[i] = events[idx[i]];
      ti[i] = times[idx[i]];
    }
  };

  Eigen::MatrixXd x_val;
  std::vector<int> bins_val, ev_val;
  std::vector<double> t_val;
  if (early_stop) gather(val_idx, x_val, bins_val, ev_val, t_val);

  nn::Adam adam(model.net_.parameters(), {cfg.lr, 0.9, 0.999, 1e-8, 0.0});
  auto params = model.net_.parameters();
  std::vector<Eigen::MatrixXd> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  const std::size_t batch = static_cast<std::size_t>(
      std::min<Eigen::Index>(cfg.batch_size, static_cast<Eigen::Index>(train_idx.size())));
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, train_idx.size());
      std::vector<std::size_t> idx(train_idx.begin() + start, train_idx.begin() + stop);
      Eigen::MatrixXd xb;
      std::vector<int> bb, eb;
      std::vector<double> tb;
      gather(idx, xb, bb, eb, tb);
      const Var logits = model.net_.forward(ad::constant(xb), true, &rng);
      const Var l = loss(logits, bb, eb, tb, cfg.alpha, cfg.sigma);
      adam.step(ad::backward(l));
    }

    if (!early_stop) continue;
    const Var logits = model.net_.forward(ad::constant(x_val), false, nullptr);
    const double val =
        loss(logits, bins_val, ev_val, t_val, cfg.alpha, cfg.sigma).value()(0, 0);
    if (val_history) val_history->push_back(val);
    if (val < best_val) {
      best_val = val;
      best_params.clear();
      for (const auto& p : params) best_params.push_back(p.value());
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (!best_params.empty())
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i].set_value(best_params[i]);
  return model;
}

Eigen::MatrixXd SurvivalNet::predict_pmf(const Eigen::MatrixXd& encoded) const {
  const Var logits = net_.forward(ad::constant(encoded), false, nullptr);
  return ad::softmax_rows(logits).value();
}

Eigen::MatrixXd SurvivalNet::predict_curves(const Eigen::MatrixXd& encoded) const {
  Eigen::MatrixXd f = predict_pmf(encoded);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
      acc += f(i, j);
      f(i, j) = std::clamp(1.0 - acc, 0.0, 1.0);
    }
  }
  return f;
}

nlohmann::json SurvivalNet::to_json() const {
  return nlohmann::json{
      {"grid", grid_.times},
      {"config",
       {{"hidden_width", cfg_.hidden_width},
        {"hidden_layers", cfg_.hidden_layers},
        {"bins", cfg_.bins},
        {"batch_size", cfg_.batch_size},
        {"max_epochs", cfg_.max_epochs},
        {"patience", cfg_.patience},
        {"lr", cfg_.lr},
        {"alpha", cfg_.alpha},
        {"sigma", cfg_.sigma},
        {"dropout", cfg_.dropout},
        {"batch_norm", cfg_.batch_norm},
        {"val_fraction", cfg_.val_fraction}}},
      {"net", net_.to_json()}};
}

SurvivalNet SurvivalNet::from_json(const nlohmann::json& j) {
  SurvivalNet m;
  m.grid_.times = j.at("grid").get<std::vector<double>>();
  const auto& c = j.at("config");
  m.cfg_.hidden_width = c.at("hidden_width").get<int>();
  m.cfg_.hidden_layers = c.at("hidden_layers").get<int>();
  m.cfg_.bins = c.at("bins").get<int>();
  m.cfg_.batch_size = c.at("batch_size").get<int>();
  m.cfg_.max_epochs = c.at("max_epochs").get<int>();
  m.cfg_.patience = c.at("patience").get<int>();
  m.cfg_.lr = c.at("lr").get<double>();
  m.cfg_.alpha = c.at("alpha").get<double>();
  m.cfg_.sigma = c.at("sigma").get<double>();
  m.cfg_.dropout = c.at("dropout").get<double>();
  m.cfg_.batch_norm = c.at("batch_norm").get<bool>();
  m.cfg_.val_fraction = c.at("val_fraction").get<double>();
  m.net_ = nn::Mlp::from_json(j.at("net"));
  return m;
}

}  // namespace survgen
