#pragma once

#include <span>
#include <string>
#include <vector>

#include "survgen/dataset.hpp"

namespace survgen {

/// Per-feature marginal distances between a real and a synthetic dataset.
/// Wasserstein is only defined for continuous features (NaN otherwise) and
/// the mean skips those entries.
struct MarginalDistanceReport {
  std::vector<std::string> feature_names;
  std::vector<double> jsd;
  std::vector<double> w1;
  double mean_jsd = 0.0;
  double mean_w1 = 0.0;
};

/// sqrt of the Jensen-Shannon divergence (base-2 logs) of two distributions
/// given directly as probability vectors over a shared support.
double jensen_shannon_pmf(std::span<const double> p, std::span<const double> q);

/// Distance between two sample columns. Continuous columns are histogrammed
/// with `bins` equal-width bins over the union range; categorical columns
/// (values = category indices) use plain category frequencies.
double jensen_shannon(std::span<const double> real_col,
                      std::span<const double> syn_col, ColumnKind kind,
                      int bins = 20);

/// Exact empirical 1-Wasserstein distance (quantile coupling; handles
/// unequal sample sizes). Throws for categorical columns.
double wasserstein1(std::span<const double> real_col,
                    std::span<const double> syn_col,
                    ColumnKind kind = ColumnKind::continuous);

MarginalDistanceReport covariate_distances(const SurvivalDataset& real,
                                           const SurvivalDataset& syn,
                                           int bins = 20);

}  // namespace survgen
