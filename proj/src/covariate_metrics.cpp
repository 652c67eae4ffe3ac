#include "survgen/covariate_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace survgen {

namespace {

double kl2(std::span<const double> p, std::span<const double> q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    d += p[i] * std::log2(p[i] / q[i]);  // q[i] > 0 whenever p[i] > 0 for m = (p+q)/2
  }
  return d;
}

std::vector<double> column_of(const SurvivalDataset& ds, std::size_t j) {
  std::vector<double> col(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) col[i] = ds.covariates[i][j];
  return col;
}

}  // namespace

double jensen_shannon_pmf(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size() || p.empty())
    throw std::invalid_argument("jensen_shannon_pmf: mismatched supports");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double js = 0.5 * kl2(p, m) + 0.5 * kl2(q, m);
  return std::sqrt(std::max(0.0, std::min(1.0, js)));
}

double jensen_shannon(std::span<const double> real_col,
                      std::span<const double> syn_col, ColumnKind kind,
                      int bins) {
  if (real_col.empty() || syn_col.empty())
    throw std::invalid_argument("jensen_shannon: empty column");

  std::vector<double> p, q;
  if (kind == ColumnKind::categorical) {
    std::size_t k = 0;
    for (double v : real_col) k = std::max(k, static_cast<std::size_t>(v) + 1);
    for (double v : syn_col) k = std::max(k, static_cast<std::size_t>(v) + 1);
    p.assign(k, 0.0);
    q.assign(k, 0.0);
    for (double v : real_col) p[static_cast<std::size_t>(v)] += 1.0 / real_col.size();
    for (double v : syn_col) q[static_cast<std::size_t>(v)] += 1.0 / syn_col.size();
  } else {
    if (bins < 1) throw std::invalid_argument("jensen_shannon: bins < 1");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : real_col) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : syn_col) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (hi <= lo) return 0.0;  // all mass in one bin either way
    const double w = (hi - lo) / bins;
    p.assign(bins, 0.0);
    q.assign(bins, 0.0);
    auto bin_of = [&](double v) {
      const int b = static_cast<int>((v - lo) / w);
      return std::min(bins - 1, std::max(0, b));
    };
    for (double v : real_col) p[bin_of(v)] += 1.0 / real_col.size();
    for (double v : syn_col) q[bin_of(v)] += 1.0 / syn_col.size();
  }
  return jensen_shannon_pmf(p, q);
}

double wasserstein1(std::span<const double> real_col,
                    std::span<const double> syn_col, ColumnKind kind) {
  if (kind == ColumnKind::categorical)
    throw std::invalid_argument("wasserstein1: undefined for categorical columns");
  if (real_col.empty() || syn_col.empty())
    throw std::invalid_argument("wasserstein1: empty column");

  std::vector<double> a(real_col.begin(), real_col.end());
  std::vector<double> b(syn_col.begin(), syn_col.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  // Integrate |F_a - F_b| over the merged sorted support.
  const double da = 1.0 / a.size(), db = 1.0 / b.size();
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, prev = std::min(a[0], b[0]), total = 0.0;
  while (i < a.size() || j < b.size()) {
    const double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    total += std::fabs(fa - fb) * (x - prev);
    while (i < a.size() && a[i] == x) { fa += da; ++i; }
    while (j < b.size() && b[j] == x) { fb += db; ++j; }
    prev = x;
  }
  return total;
}

MarginalDistanceReport covariate_distances(const SurvivalDataset& real,
                                           const SurvivalDataset& syn,
                                           int bins) {
  if (real.schema.size() != syn.schema.size())
    throw std::invalid_argument("covariate_distances: schema mismatch");

  MarginalDistanceReport rep;
  double w1_sum = 0.0;
  std::size_t w1_count = 0;
  for (std::size_t j = 0; j < real.schema.size(); ++j) {
    const auto& col = real.schema[j];
    rep.feature_names.push_back(col.name);
    const auto rc = column_of(real, j);
    const auto sc = column_of(syn, j);
    rep.jsd.push_back(jensen_shannon(rc, sc, col.kind, bins));
    if (col.kind == ColumnKind::continuous) {
      const double d = wasserstein1(rc, sc);
      rep.w1.push_back(d);
      w1_sum += d;
      ++w1_count;
    } else {
      rep.w1.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (rep.jsd.empty()) throw std::invalid_argument("covariate_distances: no features");
  double jsd_sum = 0.0;
  for (double d : rep.jsd) jsd_sum += d;
  rep.mean_jsd = jsd_sum / rep.jsd.size();
  rep.mean_w1 = w1_count ? w1_sum / w1_count : 0.0;
  return rep;
}

}  // namespace survgen
