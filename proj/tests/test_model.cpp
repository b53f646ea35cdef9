#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "tabplus/model.hpp"
#include "tabplus/ops.hpp"

using namespace tabplus;
namespace fs = std::filesystem;

namespace {

std::vector<FieldSpec> schema() {
  return {{"a", FieldKind::kCategorical, 4}, {"b", FieldKind::kNumeric, 0}, {"c", FieldKind::kNumeric, 0}};
}

struct Rows {
  std::size_t n = 0;
  std::vector<int> codes;
  std::vector<double> nums;
  BatchView view() const { return {n, codes, nums}; }
};

Rows random_rows(Rng& rng, std::size_t n) {
  Rows r{n, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    r.codes.push_back(int(rng.bounded(4)));
    r.nums.push_back(rng.uniform(-2, 2));
    r.nums.push_back(rng.uniform(-2, 2));
  }
  return r;
}

ModelConfig small(Family family) {
  ModelConfig c = default_config(family);
  c.embedding_size = 8;
  return c;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

const Family kFamilies[] = {Family::kMlpPlus, Family::kPnn, Family::kAutoInt};

}  // namespace

TEST(TabularModel, EmbeddedWidthExamples) {
  ModelConfig c = small(Family::kMlpPlus);
  EXPECT_EQ(embedded_width(c, schema()), 24u);
  c.raw_numeric_input = true;
  EXPECT_EQ(embedded_width(c, schema()), 10u);
  c.embedding_size = 16;
  EXPECT_EQ(embedded_width(c, schema()), 18u);
}

TEST(TabularModel, SkipPathNamesFollowTheSwitch) {
  for (const bool skip : {false, true}) {
    ModelConfig c = small(Family::kMlpPlus);
    c.use_skip = skip;
    TabularModel model(c, schema(), 8, 1);
    bool named = false;
    for (auto* p : model.parameters()) named |= p->name().find("skip") != std::string::npos;
    EXPECT_EQ(named, skip);
  }
}

TEST(TabularModel, ParameterCountMatchesClosedForm) {
  for (const Family f : kFamilies) {
    for (const bool skip : {false, true}) {
      for (const bool gate : {false, true}) {
        ModelConfig c = small(f);
        c.use_skip = skip;
        c.use_gate = gate;
        TabularModel model(c, schema(), 8, 2);
        EXPECT_EQ(model.parameter_count(), expected_parameter_count(c, schema())) << to_string(f);
      }
    }
  }
}

TEST(TabularModel, InitializationIsAFunctionOfSeed) {
  for (const Family f : kFamilies) {
    TabularModel a(small(f), schema(), 8, 7), b(small(f), schema(), 8, 7), c(small(f), schema(), 8, 8);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i]->name(), pb[i]->name());
      const auto va = pa[i]->tensor().values(), vb = pb[i]->tensor().values(), vc = pc[i]->tensor().values();
      EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
      differs |= !std::equal(va.begin(), va.end(), vc.begin());
    }
    EXPECT_TRUE(differs);
  }
}

TEST(TabularModel, SaturatedColumnMixSelectsOnePath) {
  for (const Family f : {Family::kPnn, Family::kAutoInt}) {
    TabularModel model(small(f), schema(), 8, 3);
    Rng rng(4);
    const Rows rows = random_rows(rng, 6);
    model.column_mix()->tensor().mutable_values()[0] = -60.0;
    const auto plain = vals(model.forward(rows.view(), {}));
    const Tensor flat = model.embedding().forward(rows.view());
    const auto block = vals(model.block().forward(flat, {}));
    for (std::size_t i = 0; i < plain.size(); ++i) EXPECT_NEAR(plain[i], block[i], 1e-12);

    model.column_mix()->tensor().mutable_values()[0] = 60.0;
    const auto inter = vals(model.forward(rows.view(), {}));
    bool moved = false;
    for (std::size_t i = 0; i < inter.size(); ++i) moved |= std::abs(inter[i] - block[i]) > 1e-9;
    EXPECT_TRUE(moved);
  }
}

TEST(TabularModel, IdenticalRowsGiveIdenticalLogits) {
  for (const Family f : kFamilies) {
    TabularModel model(small(f), schema(), 8, 5);
    const Rows rows{5, {2, 2, 2, 2, 2}, std::vector<double>(10, 0.75)};
    for (const bool train : {false, true}) {
      Rng drop(6);
      const auto y = vals(model.forward(rows.view(), {train, &drop}));
      for (std::size_t r = 1; r < 5; ++r) {
        EXPECT_NEAR(y[r * 2], y[0], 1e-12);
        EXPECT_NEAR(y[r * 2 + 1], y[1], 1e-12);
      }
    }
  }
}

TEST(TabularModel, EveryParameterReceivesGradient) {
  for (const Family f : kFamilies) {
    ModelConfig c = small(f);
    TabularModel model(c, schema(), 8, 9);
    Rng rng(10);
    Rows rows = random_rows(rng, 24);
    for (std::size_t i = 0; i < 24; ++i) rows.codes[i] = int(i % 4);
    std::vector<int> labels(24);
    for (std::size_t i = 0; i < 24; ++i) labels[i] = int(i % 2);
    Rng drop(11);
    ops::cross_entropy(model.forward(rows.view(), {true, &drop}), labels).backward();
    for (auto* p : model.parameters()) {
      ASSERT_TRUE(p->tensor().has_grad()) << p->name();
      const auto g = p->tensor().grad();
      EXPECT_TRUE(std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; })) << p->name();
    }
  }
}

TEST(TabularModel, SaveLoadRestoresPredictions) {
  const fs::path dir = fs::temp_directory_path() / "tabplus-test-model";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (const Family f : kFamilies) {
    TabularModel a(small(f), schema(), 8, 12);
    Rng rng(13);
    const Rows rows = random_rows(rng, 16);
    Rng drop(14);
    a.forward(rows.view(), {true, &drop});  // moves the running statistics
    const fs::path manifest = dir / (to_string(f) + ".json");
    a.save(manifest);
    TabularModel b(small(f), schema(), 8, 99);
    b.load(manifest);
    EXPECT_EQ(a.predict_scores(rows.view()), b.predict_scores(rows.view()));

    ModelConfig other = small(f);
    other.use_skip = false;
    TabularModel c(other, schema(), 8, 12);
    EXPECT_ANY_THROW(c.load(manifest));
  }
  fs::remove_all(dir);
}

TEST(TabularModel, RowPermutationPermutesScores) {
  for (const Family f : kFamilies) {
    TabularModel model(small(f), schema(), 8, 15);
    Rng rng(16);
    const Rows rows = random_rows(rng, 40);
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Rows shuffled{40, {}, {}};
    for (std::size_t i : perm) {
      shuffled.codes.push_back(rows.codes[i]);
      shuffled.nums.push_back(rows.nums[2 * i]);
      shuffled.nums.push_back(rows.nums[2 * i + 1]);
    }
    const auto a = model.predict_scores(rows.view());
    const auto b = model.predict_scores(shuffled.view());
    for (std::size_t k = 0; k < 40; ++k) EXPECT_NEAR(b[k], a[perm[k]], 1e-12);
  }
}

TEST(TabularModel, AttentionWeightsAreRecordedOnRequest) {
  TabularModel model(small(Family::kAutoInt), schema(), 8, 17);
  Rng rng(18);
  const Rows rows = random_rows(rng, 3);
  model.forward(rows.view(), {});
  EXPECT_TRUE(model.attention_weights().empty());
  model.record_attention(true);
  model.forward(rows.view(), {});
  const auto& a = *model.config().attention;
  EXPECT_EQ(model.attention_weights().size(), a.layers * a.heads);
  EXPECT_EQ(model.attention_weights()[0].shape(), (Shape{3, 3, 3}));
}

TEST(TabularModel, RejectsInvalidConfig) {
  ModelConfig c = small(Family::kMlpPlus);
  c.dropout = 0.3;
  EXPECT_THROW(TabularModel(c, schema(), 8, 1), ConfigError);
  EXPECT_THROW(TabularModel(small(Family::kMlpPlus), {}, 8, 1), std::invalid_argument);
}
