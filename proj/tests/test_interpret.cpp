#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "tabplus/interpret.hpp"

using namespace tabplus;

namespace {

// y depends on a and b; noise never matters.
Dataset synthetic(std::size_t n) {
  Rng rng(131);
  std::string text = "a,b,noise,y\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    text += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(rng.uniform(-2, 2)) + "," +
            (a - b + rng.uniform(-0.5, 0.5) > 0 ? "1" : "0") + "\n";
  }
  return dataset_from_table(parse_csv(text), {"y", "1"}, "synthetic");
}

ModelConfig raw() {
  ModelConfig c = default_config(Family::kMlpPlus);
  c.raw_numeric_input = true;
  return c;
}

void set_gate(LeakyGate& g, std::size_t col, double w, double b) {
  g.weight().tensor().mutable_values()[col] = w;
  g.bias().tensor().mutable_values()[col] = b;
}

const GateColumnStats& column(const GateReport& r, const std::string& name) {
  for (const auto& c : r.columns)
    if (c.column == name) return c;
  throw std::out_of_range(name);
}

struct Fixture {
  Dataset data = synthetic(200);
  FoldSplit split = make_folds(data.rows(), 3)[0];
  FoldData fold = prepare_fold(data, split);
};

}  // namespace

TEST(GatePassage, ClosedGateNeverPasses) {
  Fixture fx;
  TabularModel model(raw(), fx.fold.schema.fields(), 8, 1);
  set_gate(*model.block().main_gate(), 2, 0.0, -1.0);
  set_gate(*model.block().skip_gate(), 2, 0.0, -1.0);
  const auto r = gate_passage_stats(model, fx.fold.holdout.view());
  EXPECT_FALSE(r.embedded);
  EXPECT_EQ(r.rows, fx.fold.holdout.rows);
  const auto& c = column(r, "noise");
  EXPECT_EQ(c.main_pct, 0.0);
  EXPECT_EQ(c.skip_pct, 0.0);
  EXPECT_EQ(c.agreement_pct, 100.0);
  EXPECT_EQ(r.drop_candidates, (std::vector<std::string>{"noise"}));
}

TEST(GatePassage, OpenGatePassesEverythingAndAgrees) {
  Fixture fx;
  TabularModel model(raw(), fx.fold.schema.fields(), 8, 2);
  for (std::size_t c = 0; c < 3; ++c) {
    set_gate(*model.block().main_gate(), c, 0.0, 1.0);
    set_gate(*model.block().skip_gate(), c, 0.0, 1.0);
  }
  const auto r = gate_passage_stats(model, fx.fold.train.view());
  for (const auto& c : r.columns) {
    EXPECT_EQ(c.main_pct, 100.0);
    EXPECT_EQ(c.skip_pct, 100.0);
    EXPECT_EQ(c.agreement_pct, 100.0);
  }
  EXPECT_TRUE(r.drop_candidates.empty());
}

TEST(GatePassage, FreshGatesMatchSignCounts) {
  Fixture fx;
  TabularModel model(raw(), fx.fold.schema.fields(), 8, 3);
  // Identity gates pass exactly the positive standardized values.
  const auto view = fx.fold.validation.view();
  const auto r = gate_passage_stats(model, view);
  for (std::size_t f = 0; f < 3; ++f) {
    std::size_t pos = 0;
    for (std::size_t row = 0; row < view.rows; ++row) pos += view.numerics[row * 3 + f] > 0.0;
    const auto& c = column(r, fx.fold.schema.columns[f].name);
    EXPECT_DOUBLE_EQ(c.main_pct, 100.0 * double(pos) / double(view.rows));
    EXPECT_EQ(c.agreement_pct, 100.0);
  }
}

TEST(GatePassage, SwappingGatesSwapsShares) {
  Fixture fx;
  TabularModel a(raw(), fx.fold.schema.fields(), 8, 4), b(raw(), fx.fold.schema.fields(), 8, 4);
  const double mw[] = {0.7, -1.2, 0.0}, mb[] = {0.3, 0.1, 0.5}, sw[] = {-0.4, 2.0, 1.0}, sb[] = {0.2, -0.6, 0.0};
  for (std::size_t c = 0; c < 3; ++c) {
    set_gate(*a.block().main_gate(), c, mw[c], mb[c]);
    set_gate(*a.block().skip_gate(), c, sw[c], sb[c]);
    set_gate(*b.block().main_gate(), c, sw[c], sb[c]);
    set_gate(*b.block().skip_gate(), c, mw[c], mb[c]);
  }
  const auto ra = gate_passage_stats(a, fx.fold.train.view());
  const auto rb = gate_passage_stats(b, fx.fold.train.view());
  for (const auto& ca : ra.columns) {
    const auto& cb = column(rb, ca.column);
    EXPECT_EQ(ca.main_pct, cb.skip_pct);
    EXPECT_EQ(ca.skip_pct, cb.main_pct);
    EXPECT_EQ(ca.agreement_pct, cb.agreement_pct);
  }
}

TEST(GatePassage, ColumnsSortedByAgreement) {
  Fixture fx;
  TabularModel model(raw(), fx.fold.schema.fields(), 8, 5);
  set_gate(*model.block().skip_gate(), 0, -1.0, 0.0);  // column a disagrees everywhere except at 0
  const auto r = gate_passage_stats(model, fx.fold.train.view());
  for (std::size_t i = 1; i < r.columns.size(); ++i) EXPECT_GE(r.columns[i - 1].agreement_pct, r.columns[i].agreement_pct);
  EXPECT_EQ(r.columns.back().column, "a");
  EXPECT_EQ(gate_report_csv(r).rfind("column,main_gate_pct,skip_gate_pct,agreement_pct\n", 0), 0u);
  EXPECT_EQ(gate_report_json(r).at("columns").size(), 3u);
}

TEST(GatePassage, EmbeddedFieldsRollUp) {
  Fixture fx;
  TabularModel model(default_config(Family::kMlpPlus), fx.fold.schema.fields(), 8, 6);
  auto& main = *model.block().main_gate();
  auto& skip = *model.block().skip_gate();
  // Field 1 (b) owns columns 8..15.
  for (std::size_t c = 8; c < 16; ++c) {
    set_gate(main, c, 0.0, -2.0);
    set_gate(skip, c, 0.0, -2.0);
  }
  const auto r = gate_passage_stats(model, fx.fold.train.view());
  EXPECT_TRUE(r.embedded);
  EXPECT_EQ(r.columns.size(), 24u);
  EXPECT_NO_THROW(column(r, "b[7]"));
  ASSERT_EQ(r.fields.size(), 3u);
  EXPECT_EQ(r.fields[1].main_pct, 0.0);
  EXPECT_EQ(r.drop_candidates, (std::vector<std::string>{"b"}));
}

TEST(GatePassage, RejectsModelsWithoutBothGates) {
  Fixture fx;
  ModelConfig no_gate = raw();
  no_gate.use_gate = false;
  TabularModel a(no_gate, fx.fold.schema.fields(), 8, 7);
  EXPECT_THROW(gate_passage_stats(a, fx.fold.train.view()), std::invalid_argument);
  ModelConfig no_skip = raw();
  no_skip.use_skip = false;
  TabularModel b(no_skip, fx.fold.schema.fields(), 8, 7);
  EXPECT_THROW(gate_passage_stats(b, fx.fold.train.view()), std::invalid_argument);
  TabularModel c(default_config(Family::kPnn), fx.fold.schema.fields(), 8, 7);
  EXPECT_THROW(gate_passage_stats(c, fx.fold.train.view()), std::invalid_argument);
}

TEST(Drops, NoCandidatesIsANoOp) {
  Fixture fx;
  GateReport empty;
  TrainSettings s;
  const auto cmp = suggest_and_apply_drops(empty, fx.data, fx.split, raw(), s, 0.9);
  EXPECT_TRUE(cmp.noop);
  EXPECT_TRUE(cmp.dropped.empty());
  EXPECT_EQ(cmp.after_auroc, 0.9);
  EXPECT_TRUE(cmp.after.epochs.empty());
}

TEST(Drops, ClosedNoiseColumnIsDroppedAndRefitted) {
  Fixture fx;
  TrainSettings s;
  s.batch_size = 32;
  s.max_epochs = 6;
  s.patience = 3;
  auto base = fit(raw(), fx.fold, s);
  ASSERT_TRUE(base.result.ok);
  set_gate(*base.model.block().main_gate(), 2, 0.0, -1.0);
  set_gate(*base.model.block().skip_gate(), 2, 0.0, -1.0);
  const auto report = gate_passage_stats(base.model, fx.fold.holdout.view());
  ASSERT_EQ(report.drop_candidates, (std::vector<std::string>{"noise"}));
  const auto cmp = suggest_and_apply_drops(report, fx.data, fx.split, raw(), s, base.result.holdout_auroc);
  EXPECT_FALSE(cmp.noop);
  EXPECT_EQ(cmp.dropped, (std::vector<std::string>{"noise"}));
  EXPECT_TRUE(cmp.after.ok);
  EXPECT_FALSE(cmp.after.epochs.empty());
  EXPECT_TRUE(std::isfinite(cmp.after_auroc));
  EXPECT_GT(cmp.after_auroc, 0.8);
  const auto j = drop_comparison_json(cmp);
  EXPECT_EQ(j.dump().find("noise") != std::string::npos, true);
}
