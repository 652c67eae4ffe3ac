#include "survgen/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace survgen::nn {

using ad::Var;

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index c = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "softmax") return Activation::softmax;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

DenseLayer::DenseLayer(int in, int out, Activation act, bool batch_norm,
                       double dropout, Rng& rng)
    : in_(in), out_(out), act_(act), batch_norm_(batch_norm), dropout_(dropout) {
  if (in < 1 || out < 1) throw std::invalid_argument("layer widths must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw std::invalid_argument("dropout must lie in [0, 1)");

  const double limit = std::sqrt(6.0 / (in + out));  // Glorot uniform
  Eigen::MatrixXd w(in, out);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  w_ = ad::leaf(std::move(w), true);
  b_ = ad::leaf(Eigen::MatrixXd::Zero(1, out), true);
  if (batch_norm_) {
    gamma_ = ad::leaf(Eigen::MatrixXd::Ones(1, out), true);
    beta_ = ad::leaf(Eigen::MatrixXd::Zero(1, out), true);
    running_mean_ = Eigen::RowVectorXd::Zero(out);
    running_var_ = Eigen::RowVectorXd::Ones(out);
  }
}

Var DenseLayer::forward(const Var& x, bool training, Rng* rng) const {
  if (x.cols() != in_) throw std::invalid_argument("layer input width mismatch");
  const Eigen::Index n = x.rows();
  Var h = ad::add(ad::matmul(x, w_), ad::tile_rows(b_, n));

  if (batch_norm_) {
    if (training) {
      const double inv_n = 1.0 / static_cast<double>(n);
      Var mu = ad::scale(ad::col_sum(h), inv_n);
      Var centered = ad::sub(h, ad::tile_rows(mu, n));
      Var var = ad::scale(ad::col_sum(ad::square(centered)), inv_n);
      running_mean_ = (1.0 - kBnMomentum) * running_mean_ +
                      kBnMomentum * mu.value().row(0);
      running_var_ =
          (1.0 - kBnMomentum) * running_var_ + kBnMomentum * var.value().row(0);
      Var norm = ad::div(centered,
                         ad::tile_rows(ad::sqrt(ad::add_scalar(var, kBnEps)), n));
      h = ad::add(ad::mul(norm, ad::tile_rows(gamma_, n)),
                  ad::tile_rows(beta_, n));
    } else {
      Var mu = ad::constant(running_mean_);
      Var sd = ad::constant(
          (running_var_.array() + kBnEps).sqrt().matrix());
      Var norm = ad::div(ad::sub(h, ad::tile_rows(mu, n)), ad::tile_rows(sd, n));
      h = ad::add(ad::mul(norm, ad::tile_rows(gamma_, n)),
                  ad::tile_rows(beta_, n));
    }
  }

  switch (act_) {
    case Activation::identity: break;
    case Activation::relu: h = ad::relu(h); break;
    case Activation::leaky_relu: h = ad::leaky_relu(h, 0.2); break;
    case Activation::tanh: h = ad::tanh(h); break;
    case Activation::softmax: h = ad::softmax_rows(h); break;
  }

  if (training && dropout_ > 0.0) {
    if (!rng) throw std::invalid_argument("dropout requires an rng in training mode");
    const double keep = 1.0 - dropout_;
    Eigen::MatrixXd mask(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = rng->uniform() < dropout_ ? 0.0 : 1.0 / keep;
    h = ad::mul(h, ad::constant(std::move(mask)));
  }
  return h;
}

std::vector<Var> DenseLayer::parameters() const {
  std::vector<Var> ps{w_, b_};
  if (batch_norm_) {
    ps.push_back(gamma_);
    ps.push_back(beta_);
  }
  return ps;
}

nlohmann::json DenseLayer::to_json() const {
  nlohmann::json j{{"in", in_},
                   {"out", out_},
                   {"act", to_string(act_)},
                   {"batch_norm", batch_norm_},
                   {"dropout", dropout_},
                   {"w", matrix_to_json(w_.value())},
                   {"b", matrix_to_json(b_.value())}};
  if (batch_norm_) {
    j["gamma"] = matrix_to_json(gamma_.value());
    j["beta"] = matrix_to_json(beta_.value());
    j["running_mean"] = matrix_to_json(running_mean_);
    j["running_var"] = matrix_to_json(running_var_);
  }
  return j;
}

DenseLayer DenseLayer::from_json(const nlohmann::json& j) {
  DenseLayer l;
  l.in_ = j.at("in").get<int>();
  l.out_ = j.at("out").get<int>();
  l.act_ = activation_from_string(j.at("act").get<std::string>());
  l.batch_norm_ = j.at("batch_norm").get<bool>();
  l.dropout_ = j.at("dropout").get<double>();
  l.w_ = ad::leaf(matrix_from_json(j.at("w")), true);
  l.b_ = ad::leaf(matrix_from_json(j.at("b")), true);
  if (l.batch_norm_) {
    l.gamma_ = ad::leaf(matrix_from_json(j.at("gamma")), true);
    l.beta_ = ad::leaf(matrix_from_json(j.at("beta")), true);
    l.running_mean_ = matrix_from_json(j.at("running_mean")).row(0);
    l.running_var_ = matrix_from_json(j.at("running_var")).row(0);
  }
  return l;
}

Mlp::Mlp(const MlpConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (cfg.widths.empty() || cfg.widths.size() != cfg.acts.size())
    throw std::invalid_argument("widths and acts must be nonempty and aligned");
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const int in = i == 0 ? cfg.input_dim : cfg.widths[i - 1];
    const bool last = i + 1 == cfg.widths.size();
    layers_.emplace_back(in, cfg.widths[i], cfg.acts[i],
                         cfg.batch_norm && !last, last ? 0.0 : cfg.dropout, rng);
  }
}

Var Mlp::forward(const Var& x, bool training, Rng* rng) const {
  Var h = x;
  for (const auto& layer : layers_) h = layer.forward(h, training, rng);
  return h;
}

std::vector<Var> Mlp::parameters() const {
  std::vector<Var> ps;
  for (const auto& layer : layers_)
    for (auto& p : layer.parameters()) ps.push_back(p);
  return ps;
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json acts = nlohmann::json::array();
  for (Activation a : cfg_.acts) acts.push_back(to_string(a));
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l.to_json());
  return nlohmann::json{{"input_dim", cfg_.input_dim},
                        {"widths", cfg_.widths},
                        {"acts", acts},
                        {"dropout", cfg_.dropout},
                        {"batch_norm", cfg_.batch_norm},
                        {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.cfg_.input_dim = j.at("input_dim").get<int>();
  m.cfg_.widths = j.at("widths").get<std::vector<int>>();
  for (const auto& a : j.at("acts"))
    m.cfg_.acts.push_back(activation_from_string(a.get<std::string>()));
  m.cfg_.dropout = j.at("dropout").get<double>();
  m.cfg_.batch_norm = j.at("batch_norm").get<bool>();
  for (const auto& lj : j.at("layers")) m.layers_.push_back(DenseLayer::from_json(lj));
  return m;
}

Adam::Adam(std::vector<Var> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
}

void Adam::step(const ad::Gradients& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Eigen::MatrixXd g = grads.contains(params_[i])
                            ? grads.at(params_[i]).value()
                            : Eigen::MatrixXd::Zero(params_[i].rows(),
                                                    params_[i].cols());
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] +
            (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Eigen::ArrayXXd update =
        (m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + cfg_.eps);
    Eigen::MatrixXd p = params_[i].value();
    p -= cfg_.lr * update.matrix() + cfg_.lr * cfg_.weight_decay * p;
    params_[i].set_value(std::move(p));
  }
}

}  // namespace survgen::nn
