#include "tabplus/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>

#include "tabplus/io.hpp"
#include "tabplus/rng.hpp"

namespace tabplus {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

bool is_missing_token(std::string_view token) {
  token = trim(token);
  return token.empty() || token == "?" || token == "NA" || token == "NaN" || token == "nan";
}

bool Column::missing(std::size_t row) const {
  return kind == FieldKind::kNumeric ? std::isnan(numeric[row]) : tokens[row].empty();
}

std::size_t Column::distinct() const {
  if (kind == FieldKind::kNumeric) {
    std::set<double> seen;
    for (double v : numeric) {
      if (!std::isnan(v)) seen.insert(v);
    }
    return seen.size();
  }
  std::set<std::string> seen;
  for (const auto& t : tokens) {
    if (!t.empty()) seen.insert(t);
  }
  return seen.size();
}

double Dataset::positive_fraction() const {
  if (labels.empty()) return 0.0;
  std::size_t pos = 0;
  for (int y : labels) pos += std::size_t(y == 1);
  return double(pos) / double(labels.size());
}

std::size_t Dataset::column_index(const std::string& column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  throw DataError("dataset has no feature column '" + column + "'");
}

Dataset Dataset::without_columns(const std::vector<std::string>& names) const {
  std::set<std::size_t> drop;
  for (const auto& n : names) drop.insert(column_index(n));
  if (drop.size() >= columns.size()) throw DataError("dropping would leave no feature columns");
  Dataset out;
  out.name = name;
  out.labels = labels;
  out.label_column = label_column;
  out.positive_class = positive_class;
  out.dropped_constant = dropped_constant;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!drop.count(i)) out.columns.push_back(columns[i]);
  }
  return out;
}

Dataset dataset_from_table(const CsvTable& table, const LabelSpec& label, std::string name) {
  if (table.rows.empty()) throw DataError("dataset has no rows");
  const auto label_it = std::find(table.header.begin(), table.header.end(), label.column);
  if (label_it == table.header.end()) throw DataError("label column '" + label.column + "' not found");
  const std::size_t label_col = std::size_t(label_it - table.header.begin());
  const std::size_t n = table.rows.size();

  Dataset data;
  data.name = std::move(name);
  data.label_column = label.column;
  data.positive_class = label.positive;
  std::set<std::string> label_values;
  data.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::string_view token = trim(table.rows[r][label_col]);
    if (is_missing_token(token)) throw DataError("row " + std::to_string(r) + " has a missing label");
    label_values.emplace(token);
    data.labels[r] = token == label.positive ? 1 : 0;
  }
  if (label_values.size() != 2) {
    throw DataError("label column '" + label.column + "' must be binary, found " +
                    std::to_string(label_values.size()) + " distinct values");
  }
  if (!label_values.count(label.positive)) {
    throw DataError("positive class '" + label.positive + "' does not occur in label column '" +
                    label.column + "'");
  }

  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == label_col) continue;
    Column col;
    col.name = table.header[c];
    bool numeric = true;
    std::vector<double> values(n);
    for (std::size_t r = 0; r < n && numeric; ++r) {
      const std::string& token = table.rows[r][c];
      if (is_missing_token(token)) {
        values[r] = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_number(token, values[r])) {
        numeric = false;
      }
    }
    bool constant = false;
    if (numeric) {
      col.kind = FieldKind::kNumeric;
      col.numeric = std::move(values);
      constant = col.distinct() <= 1;
    } else {
      col.kind = FieldKind::kCategorical;
      col.tokens.reserve(n);
      bool any_missing = false;
      for (std::size_t r = 0; r < n; ++r) {
        const std::string& token = table.rows[r][c];
        const bool miss = is_missing_token(token);
        any_missing |= miss;
        col.tokens.emplace_back(miss ? std::string_view{} : trim(token));
      }
      constant = col.distinct() + (any_missing ? 1 : 0) <= 1;
    }
    if (constant) {
      data.dropped_constant.push_back(col.name);
    } else {
      data.columns.push_back(std::move(col));
    }
  }
  if (data.columns.empty()) throw DataError("no non-constant feature columns");
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const LabelSpec& label, const CsvOptions& options,
                 std::string name) {
  if (name.empty()) name = path.stem().string();
  return dataset_from_table(read_csv(path, options.delimiter, options.header), label, std::move(name));
}

std::vector<FieldSpec> FeatureSchema::fields() const {
  std::vector<FieldSpec> out;
  out.reserve(columns.size());
  for (const auto& c : columns) {
    out.push_back({c.name, c.kind, c.kind == FieldKind::kCategorical ? c.cardinality() : 0});
  }
  return out;
}

std::size_t FeatureSchema::categorical_count() const {
  return std::size_t(std::count_if(columns.begin(), columns.end(),
                                   [](const auto& c) { return c.kind == FieldKind::kCategorical; }));
}

std::size_t FeatureSchema::numeric_count() const { return columns.size() - categorical_count(); }

FeatureSchema fit_schema(const Dataset& data, std::span<const std::size_t> train_rows) {
  FeatureSchema schema;
  schema.label_column = data.label_column;
  schema.positive_class = data.positive_class;
  for (const auto& col : data.columns) {
    ColumnSchema cs;
    cs.name = col.name;
    cs.kind = col.kind;
    if (col.kind == FieldKind::kCategorical) {
      std::set<std::string> seen;
      for (std::size_t r : train_rows) {
        if (!col.tokens[r].empty()) seen.insert(col.tokens[r]);
      }
      cs.categories.assign(seen.begin(), seen.end());
    } else {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t r : train_rows) {
        if (!std::isnan(col.numeric[r])) {
          sum += col.numeric[r];
          ++count;
        }
      }
      if (count > 0) {
        cs.mean = sum / double(count);
        double ss = 0.0;
        for (std::size_t r : train_rows) {
          if (!std::isnan(col.numeric[r])) ss += (col.numeric[r] - cs.mean) * (col.numeric[r] - cs.mean);
        }
        const double sd = std::sqrt(ss / double(count));
        cs.std = sd > 0.0 ? sd : 1.0;
      }
    }
    schema.columns.push_back(std::move(cs));
  }
  return schema;
}

BatchView EncodedRows::view(std::size_t start, std::size_t count) const {
  const std::size_t nc = rows == 0 ? 0 : codes.size() / rows;
  const std::size_t nn = rows == 0 ? 0 : numerics.size() / rows;
  return {count, std::span<const int>(codes).subspan(start * nc, count * nc),
          std::span<const double>(numerics).subspan(start * nn, count * nn)};
}

EncodedRows encode_rows(const FeatureSchema& schema, const Dataset& data,
                        std::span<const std::size_t> rows) {
  if (schema.columns.size() != data.columns.size()) {
    throw DataError("schema has " + std::to_string(schema.columns.size()) + " columns, dataset has " +
                    std::to_string(data.columns.size()));
  }
  const std::size_t nc = schema.categorical_count();
  const std::size_t nn = schema.numeric_count();
  EncodedRows out;
  out.rows = rows.size();
  out.codes.resize(rows.size() * nc);
  out.numerics.resize(rows.size() * nn);
  out.labels.resize(rows.size());
  std::size_t ci = 0, ni = 0;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& cs = schema.columns[c];
    const auto& col = data.columns[c];
    if (cs.name != col.name || cs.kind != col.kind) {
      throw DataError("schema column '" + cs.name + "' does not match dataset column '" + col.name + "'");
    }
    if (cs.kind == FieldKind::kCategorical) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& token = col.tokens[rows[i]];
        const auto it = std::lower_bound(cs.categories.begin(), cs.categories.end(), token);
        const bool known = !token.empty() && it != cs.categories.end() && *it == token;
        out.codes[i * nc + ci] = known ? int(it - cs.categories.begin()) + 1 : 0;
      }
      ++ci;
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double v = col.numeric[rows[i]];
        out.numerics[i * nn + ni] = std::isnan(v) ? 0.0 : (v - cs.mean) / cs.std;
      }
      ++ni;
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) out.labels[i] = data.labels[rows[i]];
  return out;
}

EncodedRows gather(const EncodedRows& encoded, std::span<const std::size_t> rows) {
  const std::size_t nc = encoded.rows == 0 ? 0 : encoded.codes.size() / encoded.rows;
  const std::size_t nn = encoded.rows == 0 ? 0 : encoded.numerics.size() / encoded.rows;
  EncodedRows out;
  out.rows = rows.size();
  out.codes.reserve(rows.size() * nc);
  out.numerics.reserve(rows.size() * nn);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    out.codes.insert(out.codes.end(), encoded.codes.begin() + std::ptrdiff_t(r * nc),
                     encoded.codes.begin() + std::ptrdiff_t((r + 1) * nc));
    out.numerics.insert(out.numerics.end(), encoded.numerics.begin() + std::ptrdiff_t(r * nn),
                        encoded.numerics.begin() + std::ptrdiff_t((r + 1) * nn));
    out.labels.push_back(encoded.labels[r]);
  }
  return out;
}

std::vector<FoldSplit> make_folds(std::size_t n, std::uint64_t seed) {
  if (n < 20) throw std::invalid_argument("cross-validation needs at least 20 rows, got " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  const std::size_t train_n = (65 * n) / 100;
  std::vector<FoldSplit> folds;
  for (int k = 0; k < kFoldCount; ++k) {
    const std::size_t lo = std::size_t(k) * n / kFoldCount;
    const std::size_t hi = std::size_t(k + 1) * n / kFoldCount;
    FoldSplit f;
    f.seed = seed;
    f.fold = k;
    f.holdout.assign(perm.begin() + std::ptrdiff_t(lo), perm.begin() + std::ptrdiff_t(hi));
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= lo && i < hi) continue;
      (f.train.size() < train_n ? f.train : f.validation).push_back(perm[i]);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

void to_json(nlohmann::json& j, const FoldSplit& f) {
  j = {{"seed", f.seed}, {"fold", f.fold}, {"train", f.train}, {"validation", f.validation},
       {"holdout", f.holdout}};
}

std::map<std::string, DatasetEntry> load_registry(const std::filesystem::path& registry) {
  const auto doc = nlohmann::json::parse(io::read_file(registry));
  const auto base = registry.parent_path();
  std::map<std::string, DatasetEntry> out;
  for (const auto& [name, item] : doc.at("datasets").items()) {
    DatasetEntry e;
    e.name = name;
    e.path = base / item.at("path").get<std::string>();
    e.label.column = item.at("label").get<std::string>();
    e.label.positive = item.value("positive", std::string("1"));
    const auto delim = item.value("delimiter", std::string(","));
    if (delim.size() != 1) throw DataError("registry entry '" + name + "': delimiter must be one character");
    e.csv.delimiter = delim[0];
    e.csv.header = item.value("header", true);
    e.batch_size = item.at("batch_size").get<std::size_t>();
    e.ghost_size = item.at("ghost_size").get<std::size_t>();
    out.emplace(name, std::move(e));
  }
  return out;
}

Dataset load_entry(const DatasetEntry& entry) {
  if (!std::filesystem::exists(entry.path)) {
    throw DataError("dataset '" + entry.name + "' is not available: " + entry.path.string() +
                    " does not exist (see data/README.md for the download source)");
  }
  return load_csv(entry.path, entry.label, entry.csv, entry.name);
}

}  // namespace tabplus
