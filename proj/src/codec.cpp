#include "survgen/codec.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "survgen/stats.hpp"

namespace survgen {

namespace {

constexpr double kStdFloor = 1e-6;
constexpr double kPruneWeight = 1e-3;
constexpr double kLogTol = 1e-6;
constexpr int kMaxEmIters = 100;

double log_normal_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

// k-means++ seeding; may return fewer centers than asked when the remaining
// squared distances are all zero (duplicated values).
std::vector<double> kmeanspp_centers(std::span<const double> xs, int k, Rng& rng) {
  std::vector<double> centers;
  centers.push_back(xs[rng.below(xs.size())]);
  std::vector<double> d2(xs.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (xs[i] - c) * (xs[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    double u = rng.uniform() * total;
    std::size_t pick = xs.size() - 1;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      u -= d2[i];
      if (u <= 0.0) { pick = i; break; }
    }
    centers.push_back(xs[pick]);
  }
  return centers;
}

}  // namespace

GmmSpec fit_gmm_1d(std::span<const double> values, int max_components, Rng& rng) {
  if (values.empty()) throw std::invalid_argument("fit_gmm_1d: empty feature");
  if (max_components < 1) throw std::invalid_argument("fit_gmm_1d: max_components < 1");

  GmmSpec spec;
  spec.max_components = max_components;

  std::vector<double> xs(values.begin(), values.end());
  const double sample_sd = xs.size() > 1 ? stddev(xs) : 0.0;
  const bool constant = sample_sd == 0.0;
  if (constant) {
    spec.weights = {1.0};
    spec.means = {xs[0]};
    spec.stds = {std::max(sample_sd, kStdFloor)};
    return spec;
  }

  const int k_req = std::min<int>(max_components, static_cast<int>(xs.size()));
  std::vector<double> mu = kmeanspp_centers(xs, k_req, rng);
  const std::size_t k = mu.size();
  std::vector<double> w(k, 1.0 / k);
  std::vector<double> sd(k, std::max(sample_sd, kStdFloor));

  const std::size_t n = xs.size();
  std::vector<double> resp(n * k);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < kMaxEmIters; ++iter) {
    // E step with log-sum-exp
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        resp[i * k + c] = std::log(w[c]) + log_normal_pdf(xs[i], mu[c], sd[c]);
        mx = std::max(mx, resp[i * k + c]);
      }
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(resp[i * k + c] - mx);
      const double log_z = mx + std::log(z);
      ll += log_z;
      for (std::size_t c = 0; c < k; ++c)
        resp[i * k + c] = std::exp(resp[i * k + c] - log_z);
    }
    // EM cannot decrease the likelihood; the floor on std can nudge it by a
    // hair, hence the slack
    assert(ll >= prev_ll - 1e-6 * (1.0 + std::fabs(prev_ll)));
    if (std::fabs(ll - prev_ll) < kLogTol) break;
    prev_ll = ll;

    // M step
    for (std::size_t c = 0; c < k; ++c) {
      double nc = 0.0, sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nc += resp[i * k + c];
        sum += resp[i * k + c] * xs[i];
      }
      if (nc <= 0.0) { w[c] = 0.0; continue; }
      w[c] = nc / n;
      mu[c] = sum / nc;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        var += resp[i * k + c] * (xs[i] - mu[c]) * (xs[i] - mu[c]);
      sd[c] = std::max(std::sqrt(var / nc), kStdFloor);
    }
    double wsum = 0.0;
    for (double v : w) wsum += v;
    for (double& v : w) v /= wsum;
  }

  // prune tiny components, renormalize
  double kept = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (w[c] < kPruneWeight) continue;
    spec.weights.push_back(w[c]);
    spec.means.push_back(mu[c]);
    spec.stds.push_back(sd[c]);
    kept += w[c];
  }
  if (spec.weights.empty()) {
    const std::size_t top = std::max_element(w.begin(), w.end()) - w.begin();
    spec.weights = {1.0};
    spec.means = {mu[top]};
    spec.stds = {sd[top]};
  } else {
    for (double& v : spec.weights) v /= kept;
  }
  return spec;
}

namespace {

std::size_t pick_mode(const GmmSpec& g, double x, bool sample, Rng* rng) {
  const std::size_t k = g.components();
  if (k == 1) return 0;
  std::vector<double> lp(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    lp[c] = std::log(g.weights[c]) + log_normal_pdf(x, g.means[c], g.stds[c]);
    mx = std::max(mx, lp[c]);
  }
  if (!sample)
    return std::max_element(lp.begin(), lp.end()) - lp.begin();
  if (!rng) throw std::invalid_argument("mode sampling requires an rng");
  double z = 0.0;
  for (double v : lp) z += std::exp(v - mx);
  double u = rng->uniform() * z;
  for (std::size_t c = 0; c < k; ++c) {
    u -= std::exp(lp[c] - mx);
    if (u <= 0.0) return c;
  }
  return k - 1;
}

}  // namespace

Codec Codec::fit(const SurvivalDataset& train, CodecConfig cfg, int seed) {
  if (train.size() == 0) throw std::invalid_argument("Codec::fit: empty dataset");
  if (cfg.time_bins < 1) throw std::invalid_argument("Codec::fit: time_bins < 1");
  train.validate();

  Codec codec;
  codec.cfg_ = cfg;
  codec.schema_ = train.schema;
  codec.gmms_.resize(train.schema.size());

  Rng root(static_cast<std::uint64_t>(seed));
  for (std::size_t j = 0; j < train.schema.size(); ++j) {
    if (train.schema[j].kind != ColumnKind::continuous) continue;
    std::vector<double> col(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) col[i] = train.covariates[i][j];
    Rng feature_rng = root.split(j);
    codec.gmms_[j] = fit_gmm_1d(col, cfg.max_components, feature_rng);
  }

  codec.t_min_ = *std::min_element(train.times.begin(), train.times.end());
  codec.t_max_ = *std::max_element(train.times.begin(), train.times.end());
  return codec;
}

std::size_t Codec::classes_of_feature(std::size_t j) const {
  return schema_[j].kind == ColumnKind::continuous
             ? gmms_[j].components()
             : schema_[j].categories.size();
}

std::vector<double> Codec::encode(const std::vector<double>& row, Rng* rng) const {
  if (row.size() != schema_.size())
    throw std::invalid_argument("encode: row width mismatch");
  std::vector<double> out;
  out.reserve(encoded_dim());
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].kind == ColumnKind::continuous) {
      const GmmSpec& g = gmms_[j];
      const std::size_t k = pick_mode(g, row[j], cfg_.sample_modes, rng);
      for (std::size_t c = 0; c < g.components(); ++c)
        out.push_back(c == k ? 1.0 : 0.0);
      const double v = (row[j] - g.means[k]) / g.stds[k];
      out.push_back(std::clamp(v, -cfg_.clip, cfg_.clip));
    } else {
      const std::size_t idx = static_cast<std::size_t>(row[j]);
      const std::size_t cats = schema_[j].categories.size();
      if (row[j] < 0 || idx >= cats || row[j] != std::floor(row[j]))
        throw std::invalid_argument("encode: unknown category in '" +
                                    schema_[j].name + "'");
      for (std::size_t c = 0; c < cats; ++c) out.push_back(c == idx ? 1.0 : 0.0);
    }
  }
  return out;
}

std::vector<double> Codec::decode(const std::vector<double>& encoded) const {
  if (encoded.size() != encoded_dim())
    throw std::invalid_argument("decode: encoded width mismatch");
  std::vector<double> row;
  row.reserve(schema_.size());
  std::size_t pos = 0;
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const std::size_t k = classes_of_feature(j);
    const auto begin = encoded.begin() + static_cast<std::ptrdiff_t>(pos);
    const std::size_t top = std::max_element(begin, begin + k) - begin;
    pos += k;
    if (schema_[j].kind == ColumnKind::continuous) {
      const GmmSpec& g = gmms_[j];
      const double v = std::clamp(encoded[pos], -cfg_.clip, cfg_.clip);
      row.push_back(g.means[top] + g.stds[top] * v);
      ++pos;
    } else {
      row.push_back(static_cast<double>(top));
    }
  }
  return row;
}

int Codec::time_bin_of(double t) const {
  if (t_max_ <= t_min_) return 0;
  const double width = (t_max_ - t_min_) / cfg_.time_bins;
  const int bin = static_cast<int>(std::floor((t - t_min_) / width));
  return std::clamp(bin, 0, cfg_.time_bins - 1);
}

double Codec::time_bin_midpoint(int bin) const {
  if (t_max_ <= t_min_) return t_min_;
  const double width = (t_max_ - t_min_) / cfg_.time_bins;
  return t_min_ + (bin + 0.5) * width;
}

ConditionCell Codec::cell_of(const std::vector<double>& row, double t, int e,
                             Rng* rng) const {
  if (e != 0 && e != 1) throw std::invalid_argument("cell_of: E must be 0 or 1");
  ConditionCell cell;
  cell.feature_classes.reserve(schema_.size());
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].kind == ColumnKind::continuous) {
      cell.feature_classes.push_back(static_cast<int>(
          pick_mode(gmms_[j], row[j], cfg_.sample_modes, rng)));
    } else {
      const std::size_t idx = static_cast<std::size_t>(row[j]);
      if (idx >= schema_[j].categories.size())
        throw std::invalid_argument("cell_of: unknown category");
      cell.feature_classes.push_back(static_cast<int>(idx));
    }
  }
  cell.time_bin = time_bin_of(t);
  cell.e = e;
  return cell;
}

std::vector<double> Codec::condition_from_cell(const ConditionCell& cell) const {
  if (cell.feature_classes.size() != schema_.size())
    throw std::invalid_argument("condition_from_cell: feature count mismatch");
  std::vector<double> out;
  out.reserve(condition_dim());
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const std::size_t k = classes_of_feature(j);
    const int cls = cell.feature_classes[j];
    if (cls < 0 || static_cast<std::size_t>(cls) >= k)
      throw std::invalid_argument("condition_from_cell: class out of range");
    for (std::size_t c = 0; c < k; ++c)
      out.push_back(static_cast<int>(c) == cls ? 1.0 : 0.0);
  }
  for (int b = 0; b < cfg_.time_bins; ++b)
    out.push_back(b == cell.time_bin ? 1.0 : 0.0);
  out.push_back(cell.e == 0 ? 1.0 : 0.0);
  out.push_back(cell.e == 1 ? 1.0 : 0.0);
  return out;
}

std::vector<double> Codec::class_encode(const std::vector<double>& row, double t,
                                        int e, Rng* rng) const {
  return condition_from_cell(cell_of(row, t, e, rng));
}

std::size_t Codec::encoded_dim() const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < schema_.size(); ++j)
    d += classes_of_feature(j) +
         (schema_[j].kind == ColumnKind::continuous ? 1 : 0);
  return d;
}

std::size_t Codec::condition_dim() const {
  std::size_t d = static_cast<std::size_t>(cfg_.time_bins) + 2;
  for (std::size_t j = 0; j < schema_.size(); ++j) d += classes_of_feature(j);
  return d;
}

std::vector<SlotBlock> Codec::encoded_blocks() const {
  std::vector<SlotBlock> blocks;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const std::size_t k = classes_of_feature(j);
    blocks.push_back({pos, k, true});
    pos += k;
    if (schema_[j].kind == ColumnKind::continuous) {
      blocks.push_back({pos, 1, false});
      ++pos;
    }
  }
  return blocks;
}

std::vector<SlotBlock> Codec::condition_blocks() const {
  std::vector<SlotBlock> blocks;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const std::size_t k = classes_of_feature(j);
    blocks.push_back({pos, k, true});
    pos += k;
  }
  blocks.push_back({pos, static_cast<std::size_t>(cfg_.time_bins), true});
  pos += cfg_.time_bins;
  blocks.push_back({pos, 2, true});
  return blocks;
}

nlohmann::json Codec::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    nlohmann::json c{{"name", schema_[j].name},
                     {"kind", schema_[j].kind == ColumnKind::continuous
                                  ? "continuous"
                                  : "categorical"}};
    if (schema_[j].kind == ColumnKind::categorical) {
      c["categories"] = schema_[j].categories;
    } else {
      c["gmm"] = {{"weights", gmms_[j].weights},
                  {"means", gmms_[j].means},
                  {"stds", gmms_[j].stds},
                  {"max_components", gmms_[j].max_components}};
    }
    cols.push_back(std::move(c));
  }
  return nlohmann::json{{"columns", cols},
                        {"t_min", t_min_},
                        {"t_max", t_max_},
                        {"config",
                         {{"max_components", cfg_.max_components},
                          {"time_bins", cfg_.time_bins},
                          {"clip", cfg_.clip},
                          {"sample_modes", cfg_.sample_modes}}}};
}

Codec Codec::from_json(const nlohmann::json& j) {
  Codec codec;
  const auto& cj = j.at("config");
  codec.cfg_.max_components = cj.at("max_components").get<int>();
  codec.cfg_.time_bins = cj.at("time_bins").get<int>();
  codec.cfg_.clip = cj.at("clip").get<double>();
  codec.cfg_.sample_modes = cj.at("sample_modes").get<bool>();
  codec.t_min_ = j.at("t_min").get<double>();
  codec.t_max_ = j.at("t_max").get<double>();
  for (const auto& c : j.at("columns")) {
    ColumnSchema col;
    col.name = c.at("name").get<std::string>();
    GmmSpec g;
    if (c.at("kind").get<std::string>() == "continuous") {
      col.kind = ColumnKind::continuous;
      const auto& gj = c.at("gmm");
      g.weights = gj.at("weights").get<std::vector<double>>();
      g.means = gj.at("means").get<std::vector<double>>();
      g.stds = gj.at("stds").get<std::vector<double>>();
      g.max_components = gj.at("max_components").get<int>();
    } else {
      col.kind = ColumnKind::categorical;
      col.categories = c.at("categories").get<std::vector<std::string>>();
    }
    codec.schema_.push_back(std::move(col));
    codec.gmms_.push_back(std::move(g));
  }
  return codec;
}

}  // namespace survgen
