#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "survgen/survival_net.hpp"

namespace survgen {

/// Covariates already encoded by the codec, plus outcomes.
struct EncodedSurvival {
  Eigen::MatrixXd x;
  std::vector<double> times;
  std::vector<int> events;

  std::size_t size() const { return times.size(); }
};

/// Cox proportional hazards with Breslow tie handling and Breslow baseline
/// cumulative hazard. Covariates are centered internally.
struct CoxModel {
  Eigen::VectorXd beta;
  Eigen::RowVectorXd center;
  std::vector<double> base_times;   // distinct event times, ascending
  std::vector<double> base_cumhaz;  // H0 at those times
  bool ridged = false;              // ridge fallback engaged

  double cumulative_hazard(double t) const;
  double survival(double h, const Eigen::RowVectorXd& x) const;
};

/// Newton-Raphson on the Breslow partial likelihood (<=50 iterations,
/// gradient tolerance 1e-8, step halving). Separation or a singular Hessian
/// triggers a ridge refit (penalty 1e-4) with a warning. Throws when the
/// data holds no events.
CoxModel fit_cox(const Eigen::MatrixXd& x, const std::vector<double>& times,
                 const std::vector<int>& events);

/// Harrell's C over comparable pairs (i with event, t_i < t_j); risk ties
/// count 1/2. Throws when no pair is comparable.
double c_index(const std::vector<double>& times, const std::vector<int>& events,
               const std::vector<double>& risk_scores);

/// IPCW Brier score at horizon h: events before h weighted by 1/G(t_i),
/// subjects at risk at h by 1/G(h), censored-before-h excluded; G is the
/// Kaplan-Meier of the censoring distribution; mean over all N.
double brier_score(const std::vector<double>& times, const std::vector<int>& events,
                   const std::vector<double>& predicted_survival_at_h, double h);

/// 5 horizons evenly spaced strictly inside [t_min, t_max]:
/// h_k = t_min + k (t_max - t_min) / 6, k = 1..5.
std::vector<double> evaluation_horizons(double t_min, double t_max, int k = 5);

/// Downstream survival model for the TSTR harness.
class DownstreamModel {
 public:
  virtual ~DownstreamModel() = default;
  virtual std::string name() const = 0;
  virtual void fit(const EncodedSurvival& train, int seed) = 0;
  /// S(h | x) per row of x.
  virtual std::vector<double> survival_at(const Eigen::MatrixXd& x, double h) const = 0;
};

class CoxDownstream final : public DownstreamModel {
 public:
  std::string name() const override { return "coxph"; }
  void fit(const EncodedSurvival& train, int seed) override;
  std::vector<double> survival_at(const Eigen::MatrixXd& x, double h) const override;

 private:
  CoxModel model_;
};

class HazardNetDownstream final : public DownstreamModel {
 public:
  explicit HazardNetDownstream(DeepHitConfig cfg = small_config());
  static DeepHitConfig small_config();

  std::string name() const override { return "hazard_net"; }
  void fit(const EncodedSurvival& train, int seed) override;
  std::vector<double> survival_at(const Eigen::MatrixXd& x, double h) const override;

 private:
  DeepHitConfig cfg_;
  SurvivalNet net_;
};

struct TstrEntry {
  std::string model;
  std::string source;  // "synthetic" or "original"
  bool failed = false;
  std::string failure;
  std::vector<double> horizon_cindex;
  std::vector<double> horizon_brier;
  double mean_cindex = 0.0;
  double mean_brier = 0.0;
};

struct TstrReport {
  std::vector<double> horizons;
  std::vector<TstrEntry> entries;

  /// Best over non-failed models with the given source.
  const TstrEntry* best_cindex(const std::string& source) const;
  const TstrEntry* best_brier(const std::string& source) const;

  nlohmann::json to_json() const;
  void write_csv(const std::string& path) const;
};

/// Fits every model twice — on synthetic and on real_train ("original"
/// reference) — and scores both on real_test at the horizons. Training
/// failures are recorded per entry, never thrown.
TstrReport tstr(const EncodedSurvival& real_train, const EncodedSurvival& real_test,
                const EncodedSurvival& synthetic,
                const std::vector<std::shared_ptr<DownstreamModel>>& models,
                const std::vector<double>& horizons, int seed);

}  // namespace survgen
