#include "tabplus/interpret.hpp"

#include <algorithm>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "tabplus/hpo.hpp"

namespace tabplus {

namespace {

// Positive-output counts for one gate, checked against the pre-activation sign.
std::vector<std::vector<bool>> positive_mask(const LeakyGate& gate, const Tensor& x) {
  const Tensor pre = gate.pre_activation(x);
  const Tensor out = gate.forward(x);
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  std::vector<std::vector<bool>> mask(cols, std::vector<bool>(rows));
  const auto pv = pre.values();
  const auto ov = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const bool by_output = ov[r * cols + c] > 0.0;
      const bool by_sign = pv[r * cols + c] > 0.0;
      if (by_output != by_sign) {
        throw std::logic_error("gate output sign disagrees with its pre-activation at row " +
                               std::to_string(r) + ", column " + std::to_string(c));
      }
      mask[c][r] = by_output;
    }
  }
  return mask;
}

double pct(std::size_t count, std::size_t total) { return 100.0 * double(count) / double(total); }

}  // namespace

GateReport gate_passage_stats(TabularModel& model, const BatchView& rows) {
  if (model.config().family != Family::kMlpPlus) {
    throw std::invalid_argument("gate statistics need an mlp-plus model");
  }
  MlpPlusBlock& block = model.block();
  if (!block.main_gate() || !block.skip_gate()) {
    throw std::invalid_argument("gate statistics need both gates (use_gate and use_skip enabled)");
  }
  if (rows.rows == 0) throw std::invalid_argument("gate statistics need at least one row");

  NoGradGuard no_grad;
  const Tensor x = model.embedding().forward(rows);
  const auto main = positive_mask(*block.main_gate(), x);
  const auto skip = positive_mask(*block.skip_gate(), x);

  const auto& fields = model.fields();
  const auto& column_field = model.embedding().column_field();
  GateReport report;
  report.rows = rows.rows;
  report.embedded = !model.config().raw_numeric_input ||
                    std::any_of(fields.begin(), fields.end(),
                                [](const FieldSpec& f) { return f.kind == FieldKind::kCategorical; });
  report.fields.resize(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    report.fields[f].field = fields[f].name;
    report.fields[f].agreement_pct = 100.0;
  }

  std::vector<std::size_t> dim_in_field(fields.size(), 0);
  for (std::size_t c = 0; c < column_field.size(); ++c) {
    const std::size_t f = column_field[c];
    const bool multi = fields[f].kind == FieldKind::kCategorical || !model.config().raw_numeric_input;
    GateColumnStats s;
    s.field = f;
    s.column = multi ? fields[f].name + "[" + std::to_string(dim_in_field[f]++) + "]" : fields[f].name;
    std::size_t m = 0, k = 0, agree = 0;
    for (std::size_t r = 0; r < rows.rows; ++r) {
      m += main[c][r];
      k += skip[c][r];
      agree += main[c][r] == skip[c][r];
    }
    s.main_pct = pct(m, rows.rows);
    s.skip_pct = pct(k, rows.rows);
    s.agreement_pct = pct(agree, rows.rows);
    auto& fs = report.fields[f];
    fs.main_pct = std::max(fs.main_pct, s.main_pct);
    fs.skip_pct = std::max(fs.skip_pct, s.skip_pct);
    fs.agreement_pct = std::min(fs.agreement_pct, s.agreement_pct);
    report.columns.push_back(std::move(s));
  }
  std::stable_sort(report.columns.begin(), report.columns.end(),
                   [](const auto& a, const auto& b) { return a.agreement_pct > b.agreement_pct; });
  for (const auto& fs : report.fields) {
    if (fs.main_pct == 0.0 && fs.skip_pct == 0.0) report.drop_candidates.push_back(fs.field);
  }
  return report;
}

std::string gate_report_csv(const GateReport& report) {
  std::string out = "column,main_gate_pct,skip_gate_pct,agreement_pct\n";
  for (const auto& c : report.columns) {
    out += c.column + "," + format_pct(c.main_pct) + "," + format_pct(c.skip_pct) + "," +
           format_pct(c.agreement_pct) + "\n";
  }
  return out;
}

nlohmann::json gate_report_json(const GateReport& report) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : report.columns) {
    cols.push_back({{"column", c.column},
                    {"main_gate_pct", c.main_pct},
                    {"skip_gate_pct", c.skip_pct},
                    {"agreement_pct", c.agreement_pct}});
  }
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : report.fields) {
    fields.push_back({{"field", f.field},
                      {"main_gate_pct", f.main_pct},
                      {"skip_gate_pct", f.skip_pct},
                      {"agreement_pct", f.agreement_pct}});
  }
  return {{"rows", report.rows},
          {"embedded", report.embedded},
          {"columns", cols},
          {"fields", fields},
          {"drop_candidates", report.drop_candidates}};
}

DropComparison suggest_and_apply_drops(const GateReport& report, const Dataset& data,
                                       const FoldSplit& fold, const ModelConfig& config,
                                       const TrainSettings& settings, double before_auroc) {
  DropComparison cmp;
  cmp.before_auroc = before_auroc;
  cmp.after_auroc = before_auroc;
  if (report.drop_candidates.empty()) return cmp;
  const Dataset reduced = data.without_columns(report.drop_candidates);
  cmp.noop = false;
  cmp.dropped = report.drop_candidates;
  auto refit = fit(config, prepare_fold(reduced, fold), settings);
  cmp.after = std::move(refit.result);
  cmp.after_auroc = cmp.after.holdout_auroc;
  return cmp;
}

nlohmann::json drop_comparison_json(const DropComparison& c) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"status", c.noop ? "no-op" : "refit"},
                      {"dropped", c.dropped},
                      {"before_holdout_auroc", num(c.before_auroc)},
                      {"after_holdout_auroc", num(c.after_auroc)},
                      {"delta", num(c.after_auroc - c.before_auroc)}};
  if (!c.noop) j["after_best_epoch"] = c.after.best_epoch;
  return j;
}

}  // namespace tabplus
