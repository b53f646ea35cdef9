#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "tabplus/training.hpp"

namespace tabplus {

/// Share of rows (in percent) with a positive output at each gate of the
/// MLP+ block, for one gate input column.
struct GateColumnStats {
  std::string column;
  std::size_t field = 0;
  double main_pct = 0.0;
  double skip_pct = 0.0;
  double agreement_pct = 0.0;  ///< rows where both gates are positive or both are not
};

/// Roll-up over a field's columns: max positive share per gate, min agreement.
struct GateFieldStats {
  std::string field;
  double main_pct = 0.0;
  double skip_pct = 0.0;
  double agreement_pct = 0.0;
};

struct GateReport {
  std::size_t rows = 0;
  bool embedded = false;                  ///< columns are embedding dimensions
  std::vector<GateColumnStats> columns;   ///< descending agreement, ties in input order
  std::vector<GateFieldStats> fields;     ///< schema order
  std::vector<std::string> drop_candidates;  ///< fields never positive at either gate
};

/// Gate statistics of an mlp-plus model over `rows`, computed in eval mode.
/// A value counts as passed when the gate output is positive; the same
/// classification is recomputed from the sign of w x + b and the two must
/// agree. Throws std::invalid_argument unless the model is mlp-plus with
/// both gates present.
GateReport gate_passage_stats(TabularModel& model, const BatchView& rows);

std::string gate_report_csv(const GateReport& report);
nlohmann::json gate_report_json(const GateReport& report);

struct DropComparison {
  bool noop = true;
  std::vector<std::string> dropped;
  double before_auroc = 0.0;
  double after_auroc = 0.0;
  TrainResult after;
};

/// Drops the report's candidate fields and refits with the same config,
/// settings and seed. With no candidates nothing is refitted and the
/// comparison is marked no-op.
DropComparison suggest_and_apply_drops(const GateReport& report, const Dataset& data,
                                       const FoldSplit& fold, const ModelConfig& config,
                                       const TrainSettings& settings, double before_auroc);

nlohmann::json drop_comparison_json(const DropComparison& comparison);

}  // namespace tabplus
