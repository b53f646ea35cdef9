#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "tabplus/csv.hpp"
#include "tabplus/layers.hpp"

namespace tabplus {

struct LabelSpec {
  std::string column;
  std::string positive = "1";
};

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
};

/// Tokens read as missing values.
bool is_missing_token(std::string_view token);

/// A raw feature column. Numeric columns hold NaN for missing values;
/// categorical columns hold an empty token for missing values.
struct Column {
  std::string name;
  FieldKind kind = FieldKind::kNumeric;
  std::vector<double> numeric;
  std::vector<std::string> tokens;

  bool missing(std::size_t row) const;
  /// Distinct non-missing values.
  std::size_t distinct() const;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::string name;
  std::vector<Column> columns;
  std::vector<int> labels;  ///< 1 for the positive class
  std::string label_column;
  std::string positive_class;
  std::vector<std::string> dropped_constant;

  std::size_t rows() const noexcept { return labels.size(); }
  double positive_fraction() const;
  /// Index of the named feature column; throws DataError when absent.
  std::size_t column_index(const std::string& column) const;
  /// Copy without the named columns. Throws if a name is unknown or no
  /// feature column would remain.
  Dataset without_columns(const std::vector<std::string>& names) const;
};

/// Builds a dataset from a parsed table.
///
/// A column is numeric when every non-missing value parses completely as a
/// number, otherwise categorical. Constant columns are dropped: numeric with
/// at most one distinct value, categorical with at most one distinct token
/// (missing counts as a token). The label must take exactly two values, one
/// of them `label.positive`.
Dataset dataset_from_table(const CsvTable& table, const LabelSpec& label, std::string name = {});

Dataset load_csv(const std::filesystem::path& path, const LabelSpec& label, const CsvOptions& options = {},
                 std::string name = {});

/// Encoding fitted on training rows only.
struct ColumnSchema {
  std::string name;
  FieldKind kind = FieldKind::kNumeric;
  std::vector<std::string> categories;  ///< sorted; code i + 1, code 0 is missing/unknown
  double mean = 0.0;
  double std = 1.0;

  std::size_t cardinality() const noexcept { return categories.size() + 1; }
};

struct FeatureSchema {
  std::vector<ColumnSchema> columns;
  std::string label_column;
  std::string positive_class;

  std::vector<FieldSpec> fields() const;
  std::size_t categorical_count() const;
  std::size_t numeric_count() const;
};

/// Fits categories and numeric mean/std (population) on `train_rows`. A
/// numeric column that is constant within those rows keeps std 1.
FeatureSchema fit_schema(const Dataset& data, std::span<const std::size_t> train_rows);

struct EncodedRows {
  std::size_t rows = 0;
  std::vector<int> codes;        ///< [rows, categorical fields]
  std::vector<double> numerics;  ///< [rows, numeric fields], standardized
  std::vector<int> labels;

  BatchView view() const { return {rows, codes, numerics}; }
  BatchView view(std::size_t start, std::size_t count) const;
};

/// Missing numeric values become the training mean (0 after scaling);
/// missing or unseen categories become code 0.
EncodedRows encode_rows(const FeatureSchema& schema, const Dataset& data,
                        std::span<const std::size_t> rows);

/// Copies the selected rows (in the given order) into a new encoded block.
EncodedRows gather(const EncodedRows& encoded, std::span<const std::size_t> rows);

inline constexpr int kFoldCount = 5;
inline constexpr std::uint64_t kDefaultSeeds[] = {20210, 20211};

struct FoldSplit {
  std::uint64_t seed = 0;
  int fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> holdout;
};

/// Shuffles row ids with `seed`; fold k holds out permutation positions
/// [floor(k n / 5), floor((k + 1) n / 5)). Of the remaining rows, in
/// permutation order, the first floor(0.65 n) train and the rest validate.
/// No stratification.
std::vector<FoldSplit> make_folds(std::size_t n_rows, std::uint64_t seed);

void to_json(nlohmann::json& j, const FoldSplit& f);

/// Registry entry describing how to load a named dataset.
struct DatasetEntry {
  std::string name;
  std::filesystem::path path;  ///< resolved against the registry directory
  LabelSpec label;
  CsvOptions csv;
  std::size_t batch_size = 1024;
  std::size_t ghost_size = 8;
};

std::map<std::string, DatasetEntry> load_registry(const std::filesystem::path& registry);

Dataset load_entry(const DatasetEntry& entry);

}  // namespace tabplus
