#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "survgen/rng.hpp"

namespace survgen {

enum class ColumnKind { continuous, categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> categories;  // categorical only, ordered
};

/// Tabular survival data: covariates, a non-negative time per row, and an
/// event indicator (1 = event observed, 0 = censored at that time).
/// Categorical cells are stored as the index into the column's category list.
/// Immutable after construction/validation; safe to share across threads.
struct SurvivalDataset {
  std::vector<ColumnSchema> schema;
  std::vector<std::vector<double>> covariates;  // N rows x m cells
  std::vector<double> times;                    // N
  std::vector<int> events;                      // N, in {0,1}
  std::string time_name = "time";
  std::string event_name = "event";

  std::size_t size() const { return times.size(); }
  std::size_t num_features() const { return schema.size(); }

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;

  SurvivalDataset subset(const std::vector<std::size_t>& rows) const;
};

struct SplitSpec {
  double train_fraction = 0.8;
  int folds = 3;
  std::uint64_t seed = 0;
};

SurvivalDataset load_csv(const std::string& path,
                         const std::vector<ColumnSchema>& schema,
                         const std::string& time_column,
                         const std::string& event_column);

void write_csv(const SurvivalDataset& ds, const std::string& path);

std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& ds,
                                                  const SplitSpec& spec);

/// k disjoint folds; element i is (train, test) with test = fold i.
std::vector<std::pair<SurvivalDataset, SurvivalDataset>> k_folds(
    const SurvivalDataset& ds, const SplitSpec& spec);

}  // namespace survgen
