#include "survgen/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace survgen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One CSV record; supports double-quoted fields with "" escapes.
std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string escape_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';  // doubled quote escape
    out += c;
  }
  out += '"';
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

[[noreturn]] void row_error(std::size_t row, const std::string& column,
                            const std::string& what) {
  std::ostringstream os;
  os << "row " << row << ", column '" << column << "': " << what;
  throw std::invalid_argument(os.str());
}

}  // namespace

void SurvivalDataset::validate() const {
  if (times.empty()) throw std::invalid_argument("dataset is empty");
  if (covariates.size() != times.size() || events.size() != times.size())
    throw std::invalid_argument("covariates/times/events sizes disagree");
  std::set<std::string> names;
  for (const auto& col : schema) {
    if (!names.insert(col.name).second)
      throw std::invalid_argument("duplicate column name '" + col.name + "'");
    if (col.kind == ColumnKind::categorical && col.categories.empty())
      throw std::invalid_argument("categorical column '" + col.name +
                                  "' has no categories");
    if (col.kind == ColumnKind::continuous && !col.categories.empty())
      throw std::invalid_argument("continuous column '" + col.name +
                                  "' carries a category list");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i]))
      row_error(i + 1, time_name, "negative time");
    if (events[i] != 0 && events[i] != 1)
      row_error(i + 1, event_name, "event not in {0,1}");
    if (covariates[i].size() != schema.size())
      row_error(i + 1, "<row>", "wrong number of cells");
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const double v = covariates[i][j];
      if (!std::isfinite(v)) row_error(i + 1, schema[j].name, "non-finite value");
      if (schema[j].kind == ColumnKind::categorical) {
        const auto idx = static_cast<long>(v);
        if (v != static_cast<double>(idx) || idx < 0 ||
            idx >= static_cast<long>(schema[j].categories.size()))
          row_error(i + 1, schema[j].name, "category index out of range");
      }
    }
  }
}

SurvivalDataset SurvivalDataset::subset(const std::vector<std::size_t>& rows) const {
  SurvivalDataset out;
  out.schema = schema;
  out.time_name = time_name;
  out.event_name = event_name;
  out.covariates.reserve(rows.size());
  out.times.reserve(rows.size());
  out.events.reserve(rows.size());
  for (std::size_t r : rows) {
    out.covariates.push_back(covariates.at(r));
    out.times.push_back(times.at(r));
    out.events.push_back(events.at(r));
  }
  return out;
}

SurvivalDataset load_csv(const std::string& path,
                         const std::vector<ColumnSchema>& schema,
                         const std::string& time_column,
                         const std::string& event_column) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("'" + path + "' is empty");
  const auto header = parse_csv_line(line);

  auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return i;
    throw std::invalid_argument("missing column '" + name + "' in '" + path + "'");
  };

  const std::size_t time_idx = column_index(time_column);
  const std::size_t event_idx = column_index(event_column);
  std::vector<std::size_t> feature_idx;
  feature_idx.reserve(schema.size());
  for (const auto& col : schema) feature_idx.push_back(column_index(col.name));

  SurvivalDataset ds;
  ds.schema = schema;
  ds.time_name = time_column;
  ds.event_name = event_column;

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = parse_csv_line(line);
    if (fields.size() != header.size())
      row_error(row, "<row>", "expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));

    double t;
    if (!parse_double(fields[time_idx], t))
      row_error(row, time_column, "non-numeric time '" + trim(fields[time_idx]) + "'");
    if (t < 0.0) row_error(row, time_column, "negative time");

    double e;
    if (!parse_double(fields[event_idx], e) || (e != 0.0 && e != 1.0))
      row_error(row, event_column, "event not in {0,1}");

    std::vector<double> cells(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const std::string raw = trim(fields[feature_idx[j]]);
      const auto& col = schema[j];
      if (col.kind == ColumnKind::continuous) {
        double v;
        if (!parse_double(raw, v))
          row_error(row, col.name, "non-numeric value '" + raw + "'");
        cells[j] = v;
      } else {
        const auto it = std::find(col.categories.begin(), col.categories.end(), raw);
        if (it == col.categories.end())
          row_error(row, col.name, "unknown category '" + raw + "'");
        cells[j] = static_cast<double>(it - col.categories.begin());
      }
    }
    ds.covariates.push_back(std::move(cells));
    ds.times.push_back(t);
    ds.events.push_back(static_cast<int>(e));
  }

  ds.validate();
  return ds;
}

void write_csv(const SurvivalDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  for (std::size_t j = 0; j < ds.schema.size(); ++j)
    out << escape_csv(ds.schema[j].name) << ',';
  out << escape_csv(ds.time_name) << ',' << escape_csv(ds.event_name) << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.schema.size(); ++j) {
      const auto& col = ds.schema[j];
      if (col.kind == ColumnKind::continuous)
        out << format_double(ds.covariates[i][j]);
      else
        out << escape_csv(col.categories[static_cast<std::size_t>(ds.covariates[i][j])]);
      out << ',';
    }
    out << format_double(ds.times[i]) << ',' << ds.events[i] << '\n';
  }
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::pair<SurvivalDataset, SurvivalDataset> split(const SurvivalDataset& ds,
                                                  const SplitSpec& spec) {
  const std::size_t n = ds.size();
  if (n < 2) throw std::invalid_argument("need at least 2 rows to split");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1)");
  const auto n_train =
      static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n)
    throw std::invalid_argument("train_fraction produces an empty side");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(idx);
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + n_train);
  std::vector<std::size_t> test_idx(idx.begin() + n_train, idx.end());
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

std::vector<std::pair<SurvivalDataset, SurvivalDataset>> k_folds(
    const SurvivalDataset& ds, const SplitSpec& spec) {
  const std::size_t n = ds.size();
  const auto k = static_cast<std::size_t>(spec.folds);
  if (spec.folds < 2) throw std::invalid_argument("folds must be >= 2");
  if (n < k) throw std::invalid_argument("fewer rows than folds");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(idx);

  std::vector<std::pair<SurvivalDataset, SurvivalDataset>> out;
  out.reserve(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k;
    const std::size_t hi = (f + 1) * n / k;
    std::vector<std::size_t> test_idx(idx.begin() + lo, idx.begin() + hi);
    std::vector<std::size_t> train_idx;
    train_idx.reserve(n - (hi - lo));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + lo);
    train_idx.insert(train_idx.end(), idx.begin() + hi, idx.end());
    out.emplace_back(ds.subset(train_idx), ds.subset(test_idx));
  }
  return out;
}

}  // namespace survgen
