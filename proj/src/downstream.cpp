#include "survgen/downstream.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "survgen/km.hpp"

namespace survgen {

namespace {

struct CoxObjective {
  const Eigen::MatrixXd& x;  // centered
  const std::vector<double>& times;
  const std::vector<int>& events;
  std::vector<std::size_t> order;  // by time descending
  double ridge = 0.0;

  // log partial likelihood, gradient, hessian at beta (Breslow ties)
  void evaluate(const Eigen::VectorXd& beta, double& ll, Eigen::VectorXd& grad,
                Eigen::MatrixXd& hess) const {
    const Eigen::Index p = x.cols();
    ll = 0.0;
    grad = Eigen::VectorXd::Zero(p);
    hess = Eigen::MatrixXd::Zero(p, p);

    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    std::size_t i = 0;
    while (i < order.size()) {
      const double t = times[order[i]];
      // everyone with time >= t enters the risk set before events at t score
      std::size_t j = i;
      while (j < order.size() && times[order[j]] == t) {
        const auto row = x.row(static_cast<Eigen::Index>(order[j]));
        const double w = std::exp((row * beta).value());
        s0 += w;
        s1 += w * row.transpose();
        s2 += w * row.transpose() * row;
        ++j;
      }
      double d = 0.0;
      Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
      for (std::size_t k = i; k < j; ++k) {
        if (events[order[k]] != 1) continue;
        d += 1.0;
        xsum += x.row(static_cast<Eigen::Index>(order[k])).transpose();
        ll += (x.row(static_cast<Eigen::Index>(order[k])) * beta).value();
      }
      if (d > 0.0) {
        ll -= d * std::log(s0);
        grad += xsum - d * (s1 / s0);
        hess -= d * (s2 / s0 - (s1 / s0) * (s1 / s0).transpose());
      }
      i = j;
    }
    if (ridge > 0.0) {
      ll -= 0.5 * ridge * beta.squaredNorm();
      grad -= ridge * beta;
      hess -= ridge * Eigen::MatrixXd::Identity(p, p);
    }
  }
};

// evaluate() sums thousands of O(1) terms, so the achievable gradient norm at
// the optimum is bounded by rounding noise of order eps * |loglik|; the
// tolerance has to scale the same way or large-n fits stall just above it
double grad_tol(double ll) { return 1e-9 * std::max(1.0, std::abs(ll)); }

bool newton_solve(const CoxObjective& obj, Eigen::VectorXd& beta) {
  double ll;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  obj.evaluate(beta, ll, grad, hess);
  if (!std::isfinite(ll)) return false;

  for (int iter = 0; iter < 50; ++iter) {
    if (grad.norm() < grad_tol(ll)) return true;
    const Eigen::VectorXd step = (-hess).ldlt().solve(grad);
    if (!step.allFinite()) return false;

    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 30; ++half, scale *= 0.5) {
      const Eigen::VectorXd cand = beta + scale * step;
      double cand_ll;
      Eigen::VectorXd cand_grad;
      Eigen::MatrixXd cand_hess;
      obj.evaluate(cand, cand_ll, cand_grad, cand_hess);
      if (std::isfinite(cand_ll) && cand_ll >= ll - 1e-12) {
        beta = cand;
        ll = cand_ll;
        grad = cand_grad;
        hess = cand_hess;
        moved = true;
        break;
      }
    }
    if (!moved) return false;
  }
  return grad.norm() < grad_tol(ll);
}

}  // namespace

double CoxModel::cumulative_hazard(double t) const {
  const auto it = std::upper_bound(base_times.begin(), base_times.end(), t);
  if (it == base_times.begin()) return 0.0;
  return base_cumhaz[static_cast<std::size_t>(it - base_times.begin()) - 1];
}

double CoxModel::survival(double h, const Eigen::RowVectorXd& x) const {
  const double eta = ((x - center) * beta).value();
  return std::exp(-cumulative_hazard(h) * std::exp(eta));
}

CoxModel fit_cox(const Eigen::MatrixXd& x, const std::vector<double>& times,
                 const std::vector<int>& events) {
  const std::size_t n = times.size();
  if (n == 0 || x.rows() != static_cast<Eigen::Index>(n) || events.size() != n)
    throw std::invalid_argument("fit_cox: empty or misaligned input");
  if (std::none_of(events.begin(), events.end(), [](int e) { return e == 1; }))
    throw std::invalid_argument("fit_cox: no events");

  CoxModel model;
  model.center = x.colwise().mean();
  Eigen::MatrixXd xc = x.rowwise() - model.center;

  CoxObjective obj{xc, times, events, {}, 0.0};
  obj.order.resize(n);
  std::iota(obj.order.begin(), obj.order.end(), 0);
  std::sort(obj.order.begin(), obj.order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

  model.beta = Eigen::VectorXd::Zero(x.cols());
  if (!newton_solve(obj, model.beta)) {
    std::cerr << "warning: Cox fit unstable, refitting with ridge penalty 1e-4\n";
    model.ridged = true;
    obj.ridge = 1e-4;
    model.beta = Eigen::VectorXd::Zero(x.cols());
    if (!newton_solve(obj, model.beta))
      throw std::runtime_error("fit_cox: Newton failed to converge even with ridge");
  }

  // stationarity check at the optimum
  {
    double ll;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    obj.evaluate(model.beta, ll, grad, hess);
    if (grad.norm() >= 1e-6)
      throw std::runtime_error("fit_cox: gradient norm above 1e-6 at solution");
  }

  // Breslow baseline cumulative hazard over ascending distinct event times
  std::vector<std::size_t> asc(obj.order.rbegin(), obj.order.rend());
  std::vector<double> eta(n);
  for (std::size_t i = 0; i < n; ++i)
    eta[i] = (xc.row(static_cast<Eigen::Index>(i)) * model.beta).value();

  // risk-set sum shrinks as time advances
  double s0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) s0 += std::exp(eta[i]);
  double cum = 0.0;
  std::size_t i = 0;
  while (i < asc.size()) {
    const double t = times[asc[i]];
    std::size_t j = i;
    double d = 0.0, leaving = 0.0;
    while (j < asc.size() && times[asc[j]] == t) {
      if (events[asc[j]] == 1) d += 1.0;
      leaving += std::exp(eta[asc[j]]);
      ++j;
    }
    if (d > 0.0) {
      cum += d / s0;
      model.base_times.push_back(t);
      model.base_cumhaz.push_back(cum);
    }
    s0 -= leaving;
    i = j;
  }
  return model;
}

double c_index(const std::vector<double>& times, const std::vector<int>& events,
               const std::vector<double>& risk_scores) {
  const std::size_t n = times.size();
  if (events.size() != n || risk_scores.size() != n)
    throw std::invalid_argument("c_index: misaligned inputs");
  double comparable = 0.0, score = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (events[i] != 1) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (times[i] >= times[j]) continue;
      comparable += 1.0;
      if (risk_scores[i] > risk_scores[j]) score += 1.0;
      else if (risk_scores[i] == risk_scores[j]) score += 0.5;
    }
  }
  if (comparable == 0.0) throw std::invalid_argument("c_index: no comparable pairs");
  return score / comparable;
}

double brier_score(const std::vector<double>& times, const std::vector<int>& events,
                   const std::vector<double>& predicted_survival_at_h, double h) {
  const std::size_t n = times.size();
  if (events.size() != n || predicted_survival_at_h.size() != n || n == 0)
    throw std::invalid_argument("brier_score: misaligned inputs");
  for (double s : predicted_survival_at_h)
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("brier_score: prediction outside [0,1]");

  // censoring distribution: flip the event labels
  std::vector<int> censor_events(n);
  for (std::size_t i = 0; i < n; ++i) censor_events[i] = 1 - events[i];
  const StepSurvivalCurve g = kaplan_meier(times, censor_events);

  double total = 0.0;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = predicted_survival_at_h[i];
    if (times[i] <= h && events[i] == 1) {
      const double gi = g.at(times[i]);
      if (gi <= 0.0) { ++dropped; continue; }
      total += s * s / gi;
    } else if (times[i] > h) {
      const double gh = g.at(h);
      if (gh <= 0.0) { ++dropped; continue; }
      total += (1.0 - s) * (1.0 - s) / gh;
    }
    // censored at or before h: excluded
  }
  if (dropped > 0)
    std::cerr << "warning: brier_score dropped " << dropped
              << " subjects with zero censoring-survival weight\n";
  return total / static_cast<double>(n);
}

std::vector<double> evaluation_horizons(double t_min, double t_max, int k) {
  if (!(t_max > t_min)) throw std::invalid_argument("evaluation_horizons: bad range");
  std::vector<double> hs(k);
  for (int i = 1; i <= k; ++i)
    hs[i - 1] = t_min + i * (t_max - t_min) / (k + 1);
  return hs;
}

void CoxDownstream::fit(const EncodedSurvival& train, int) {
  model_ = fit_cox(train.x, train.times, train.events);
}

std::vector<double> CoxDownstream::survival_at(const Eigen::MatrixXd& x,
                                               double h) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    out[static_cast<std::size_t>(i)] = model_.survival(h, x.row(i));
  return out;
}

DeepHitConfig HazardNetDownstream::small_config() {
  DeepHitConfig cfg;
  cfg.hidden_width = 64;
  cfg.hidden_layers = 2;
  cfg.bins = 50;
  cfg.batch_size = 100;
  cfg.max_epochs = 200;
  cfg.patience = 10;
  return cfg;
}

HazardNetDownstream::HazardNetDownstream(DeepHitConfig cfg) : cfg_(cfg) {}

void HazardNetDownstream::fit(const EncodedSurvival& train, int seed) {
  const auto [mn, mx] =
      std::minmax_element(train.times.begin(), train.times.end());
  const HorizonGrid grid = HorizonGrid::make(*mn, *mx, cfg_.bins);
  net_ = SurvivalNet::train(train.x, train.times, train.events, grid, cfg_, seed);
}

std::vector<double> HazardNetDownstream::survival_at(const Eigen::MatrixXd& x,
                                                     double h) const {
  const Eigen::MatrixXd curves = net_.predict_curves(x);
  const HorizonGrid& grid = net_.grid();
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (h < grid.times.front()) {
      out[static_cast<std::size_t>(i)] = 1.0;
    } else {
      out[static_cast<std::size_t>(i)] = curves(i, grid.bin_of(h));
    }
  }
  return out;
}

namespace {

TstrEntry score_model(DownstreamModel& model, const std::string& source,
                      const EncodedSurvival& fit_on, const EncodedSurvival& test,
                      const std::vector<double>& horizons, int seed) {
  TstrEntry entry;
  entry.model = model.name();
  entry.source = source;
  try {
    if (fit_on.size() == 0)
      throw std::invalid_argument("empty training data");
    model.fit(fit_on, seed);
    for (double h : horizons) {
      const std::vector<double> surv = model.survival_at(test.x, h);
      std::vector<double> risk(surv.size());
      for (std::size_t i = 0; i < surv.size(); ++i) risk[i] = 1.0 - surv[i];
      entry.horizon_cindex.push_back(c_index(test.times, test.events, risk));
      entry.horizon_brier.push_back(
          brier_score(test.times, test.events, surv, h));
    }
    double csum = 0.0, bsum = 0.0;
    for (double v : entry.horizon_cindex) csum += v;
    for (double v : entry.horizon_brier) bsum += v;
    entry.mean_cindex = csum / entry.horizon_cindex.size();
    entry.mean_brier = bsum / entry.horizon_brier.size();
  } catch (const std::exception& e) {
    entry.failed = true;
    entry.failure = e.what();
    entry.horizon_cindex.clear();
    entry.horizon_brier.clear();
  }
  return entry;
}

}  // namespace

const TstrEntry* TstrReport::best_cindex(const std::string& source) const {
  const TstrEntry* best = nullptr;
  for (const auto& e : entries)
    if (!e.failed && e.source == source &&
        (!best || e.mean_cindex > best->mean_cindex))
      best = &e;
  return best;
}

const TstrEntry* TstrReport::best_brier(const std::string& source) const {
  const TstrEntry* best = nullptr;
  for (const auto& e : entries)
    if (!e.failed && e.source == source &&
        (!best || e.mean_brier < best->mean_brier))
      best = &e;
  return best;
}

TstrReport tstr(const EncodedSurvival& real_train, const EncodedSurvival& real_test,
                const EncodedSurvival& synthetic,
                const std::vector<std::shared_ptr<DownstreamModel>>& models,
                const std::vector<double>& horizons, int seed) {
  TstrReport report;
  report.horizons = horizons;
  for (const auto& model : models) {
    report.entries.push_back(
        score_model(*model, "synthetic", synthetic, real_test, horizons, seed));
    report.entries.push_back(
        score_model(*model, "original", real_train, real_test, horizons, seed));
  }
  return report;
}

nlohmann::json TstrReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row{{"model", e.model}, {"source", e.source}, {"failed", e.failed}};
    if (e.failed) {
      row["failure"] = e.failure;
    } else {
      row["horizon_cindex"] = e.horizon_cindex;
      row["horizon_brier"] = e.horizon_brier;
      row["mean_cindex"] = e.mean_cindex;
      row["mean_brier"] = e.mean_brier;
    }
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"horizons", horizons}, {"entries", rows}};
}

void TstrReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  auto fmt = [](double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  out << "model,source,mean_cindex,mean_brier,failed\n";
  for (const auto& e : entries) {
    out << e.model << ',' << e.source << ',';
    if (e.failed) out << ",,*\n";
    else out << fmt(e.mean_cindex) << ',' << fmt(e.mean_brier) << ",\n";
  }
}

}  // namespace survgen
