#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tabplus/layers.hpp"
#include "tabplus/ops.hpp"

using namespace tabplus;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void set_values(Parameter& p, std::vector<double> v) {
  auto dst = p.tensor().mutable_values();
  std::copy(v.begin(), v.end(), dst.begin());
}

}  // namespace

TEST(LeakyGate, FreshGateIsLeakyRelu) {
  LeakyGate g("g", 3);
  const Tensor x = Tensor::from({1, 3}, {-2.0, 0.0, 5.0});
  EXPECT_EQ(vals(g.forward(x)), vals(ops::leaky_relu(x, kDefaultLeakySlope)));
}

TEST(LeakyGate, AffineThenLeak) {
  LeakyGate g("g", 2, 0.1);
  set_values(g.weight(), {2.0, -1.0});
  set_values(g.bias(), {-1.0, 0.5});
  const auto y = vals(g.forward(Tensor::from({2, 2}, {1.0, 1.0, 0.0, -1.0})));
  EXPECT_DOUBLE_EQ(y[0], 1.0);    // 2 - 1
  EXPECT_DOUBLE_EQ(y[1], -0.05);  // 0.1 * (-1 + 0.5)
  EXPECT_DOUBLE_EQ(y[2], -0.1);   // 0.1 * -1
  EXPECT_DOUBLE_EQ(y[3], 1.5);
}

TEST(LeakyGate, WidthMismatchThrows) {
  LeakyGate g("g", 3);
  EXPECT_THROW(g.forward(Tensor::zeros({2, 4})), ShapeError);
  EXPECT_THROW(LeakyGate("g", 0), std::invalid_argument);
}

TEST(GatePartition, PositiveWeight) {
  const auto p = gate_partition(1.0, -2.0);
  EXPECT_EQ(p.pass, (Interval{2.0, kInf, false, false, false}));
  EXPECT_EQ(p.leak, (Interval{-kInf, 2.0, false, true, false}));
  EXPECT_FALSE(p.pass.contains(2.0));
  EXPECT_TRUE(p.leak.contains(2.0));
}

TEST(GatePartition, NegativeWeight) {
  const auto p = gate_partition(-1.0, 2.0);
  EXPECT_EQ(p.pass, (Interval{-kInf, 2.0, false, false, false}));
  EXPECT_EQ(p.leak, (Interval{2.0, kInf, true, false, false}));
  EXPECT_TRUE(p.pass.contains(1.999));
  EXPECT_TRUE(p.leak.contains(2.0));
}

TEST(GatePartition, ZeroWeight) {
  const auto on = gate_partition(0.0, 1.0);
  EXPECT_TRUE(on.leak.empty);
  EXPECT_TRUE(on.pass.contains(-1e300));
  EXPECT_TRUE(on.pass.contains(1e300));
  const auto off = gate_partition(0.0, 0.0);
  EXPECT_TRUE(off.pass.empty);
  EXPECT_TRUE(off.leak.contains(0.0));
}

TEST(GatePartition, MatchesGateSignEverywhere) {
  Rng rng(31);
  for (int t = 0; t < 2000; ++t) {
    // Boundary draws use dyadic w and b so that -b / w is exact.
    const bool boundary = rng.bounded(4) == 0;
    const double dyadic_w[] = {-4.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 4.0};
    const double w = boundary ? dyadic_w[rng.bounded(8)] : rng.bounded(5) == 0 ? 0.0 : rng.uniform(-3, 3);
    const double b = boundary ? double(int(rng.bounded(25)) - 12) / 4 : rng.uniform(-3, 3);
    const double x = boundary ? -b / w : rng.uniform(-5, 5);
    const auto p = gate_partition(w, b);
    const bool passes = w * x + b > 0;
    EXPECT_EQ(p.pass.contains(x), passes) << w << " " << b << " " << x;
    EXPECT_NE(p.pass.contains(x), p.leak.contains(x));
  }
}

TEST(GhostBatchNorm, SegmentRule) {
  using S = std::vector<kernels::Segment>;
  auto sizes = [](const S& s) {
    std::vector<std::size_t> out;
    for (auto& x : s) out.push_back(x.size);
    return out;
  };
  EXPECT_EQ(sizes(GhostBatchNorm::segments(8, 4)), (std::vector<std::size_t>{4, 4}));
  EXPECT_EQ(sizes(GhostBatchNorm::segments(9, 4)), (std::vector<std::size_t>{4, 5}));
  EXPECT_EQ(sizes(GhostBatchNorm::segments(10, 4)), (std::vector<std::size_t>{4, 4, 2}));
  EXPECT_EQ(sizes(GhostBatchNorm::segments(3, 8)), (std::vector<std::size_t>{3}));
  EXPECT_TRUE(GhostBatchNorm::segments(0, 8).empty());
}

TEST(GhostBatchNorm, SegmentsTileTheBatch) {
  for (std::size_t batch = 2; batch < 300; ++batch) {
    for (std::size_t ghost : {2u, 3u, 8u, 16u, 256u}) {
      std::size_t next = 0;
      for (const auto& s : GhostBatchNorm::segments(batch, ghost)) {
        EXPECT_EQ(s.begin, next);
        EXPECT_GE(s.size, 2u);
        EXPECT_LE(s.size, std::max<std::size_t>(ghost + 1, batch < ghost ? batch : 0));
        next += s.size;
      }
      EXPECT_EQ(next, batch);
    }
  }
}

TEST(GhostBatchNorm, TrainingNeedsTwoRows) {
  GhostBatchNorm bn("bn", 2, 4);
  EXPECT_THROW(bn.forward(Tensor::zeros({1, 2}), true), std::invalid_argument);
  EXPECT_NO_THROW(bn.forward(Tensor::zeros({1, 2}), false));
  EXPECT_THROW(GhostBatchNorm("bn", 2, 1), std::invalid_argument);
}

TEST(GhostBatchNorm, ConstantColumnNormalizesToZero) {
  GhostBatchNorm bn("bn", 1, 4);
  for (double v : vals(bn.forward(Tensor::full({8, 1}, 3.5), true))) EXPECT_EQ(v, 0.0);
}

TEST(GhostBatchNorm, EverySegmentIsStandardized) {
  Rng rng(32);
  GhostBatchNorm bn("bn", 3, 4);
  const Tensor x = oracle::random_tensor(rng, {8, 3}, -10, 10);
  const auto y = vals(bn.forward(x, true));
  for (std::size_t s = 0; s < 2; ++s) {
    for (std::size_t j = 0; j < 3; ++j) {
      double mean = 0, var = 0;
      for (std::size_t r = 0; r < 4; ++r) mean += y[(s * 4 + r) * 3 + j] / 4;
      for (std::size_t r = 0; r < 4; ++r) var += std::pow(y[(s * 4 + r) * 3 + j] - mean, 2) / 4;
      EXPECT_NEAR(mean, 0.0, 1e-10);
      // The epsilon in the denominator keeps the variance just below one.
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
  }
}

TEST(GhostBatchNorm, GhostAtLeastBatchMatchesPlainBatchNorm) {
  Rng rng(33);
  GhostBatchNorm bn("bn", 4, 64);
  set_values(bn.scale(), {1.0, 2.0, 0.5, -1.0});
  set_values(bn.shift(), {0.0, 1.0, -1.0, 3.0});
  const Tensor x = oracle::random_tensor(rng, {37, 4}, -5, 5);
  const auto got = vals(bn.forward(x, true));
  const std::vector<double> scale{1.0, 2.0, 0.5, -1.0}, shift{0.0, 1.0, -1.0, 3.0};
  const auto want = oracle::plain_batch_norm(x.values(), 37, 4, scale, shift, GhostBatchNorm::kEpsilon);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(GhostBatchNorm, EvalOutputIndependentOfBatchComposition) {
  Rng rng(34);
  GhostBatchNorm bn("bn", 3, 4);
  for (int i = 0; i < 5; ++i) bn.forward(oracle::random_tensor(rng, {16, 3}, -2, 4), true);
  const Tensor x = oracle::random_tensor(rng, {10, 3});
  const auto full = vals(bn.forward(x, false));
  for (std::size_t r = 0; r < 10; ++r) {
    const auto row = vals(bn.forward(ops::slice(x, 0, r, 1), false));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(row[j], full[r * 3 + j]);
  }
}

TEST(GhostBatchNorm, RunningStatisticsTrackSegments) {
  GhostBatchNorm bn("bn", 1, 2);
  // Two segments {0, 2} and {4, 6}: means 1 and 5, unbiased variance 2 each.
  bn.forward(Tensor::from({4, 1}, {0, 2, 4, 6}), true);
  const double m1 = 0.1 * 1.0, m2 = 0.9 * m1 + 0.1 * 5.0;
  const double v1 = 0.9 + 0.2, v2 = 0.9 * v1 + 0.2;
  EXPECT_NEAR(bn.running_mean()[0], m2, 1e-15);
  EXPECT_NEAR(bn.running_var()[0], v2, 1e-15);
}

TEST(GhostBatchNorm, RunningVarianceStaysPositive) {
  Rng rng(35);
  GhostBatchNorm bn("bn", 2, 3);
  for (int i = 0; i < 200; ++i) {
    const Tensor x = rng.bounded(3) == 0 ? Tensor::full({7, 2}, 1.0) : oracle::random_tensor(rng, {7, 2});
    bn.forward(x, true);
    for (double v : bn.running_var()) EXPECT_GT(v, 0.0);
  }
}

namespace {

std::vector<FieldSpec> mixed_schema() {
  return {{"colour", FieldKind::kCategorical, 3},
          {"age", FieldKind::kNumeric, 0},
          {"size", FieldKind::kCategorical, 4},
          {"income", FieldKind::kNumeric, 0}};
}

}  // namespace

TEST(FieldEmbedding, LayoutFollowsSchemaOrder) {
  Rng init(36);
  FieldEmbedding emb("emb", mixed_schema(), 2, false, init);
  EXPECT_EQ(emb.output_width(), 8u);
  EXPECT_EQ(emb.column_field(), (std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3}));
  set_values(emb.table(0), {1, 2, 3, 4, 5, 6});           // [m=2, c=3]
  set_values(emb.table(1), {10, 20});                     // [m]
  set_values(emb.table(2), {1, 2, 3, 4, 5, 6, 7, 8});     // [m=2, c=4]
  set_values(emb.table(3), {-1, 1});
  const std::vector<int> codes{2, 1};
  const std::vector<double> nums{0.5, 3.0};
  const auto y = vals(emb.forward({1, codes, nums}));
  EXPECT_EQ(y, (std::vector<double>{3, 6, 5, 10, 2, 6, -3, 3}));
}

TEST(FieldEmbedding, RawNumericColumnsPassThrough) {
  Rng init(37);
  FieldEmbedding emb("emb", mixed_schema(), 3, true, init);
  EXPECT_EQ(emb.output_width(), 3u + 1u + 3u + 1u);
  const std::vector<int> codes{0, 0};
  const std::vector<double> nums{0.25, -7.0};
  const auto y = vals(emb.forward({1, codes, nums}));
  EXPECT_EQ(y[3], 0.25);
  EXPECT_EQ(y[7], -7.0);
}

TEST(FieldEmbedding, OutOfRangeCodeNamesTheField) {
  Rng init(38);
  FieldEmbedding emb("emb", mixed_schema(), 2, false, init);
  const std::vector<int> codes{0, 4};
  const std::vector<double> nums{0.0, 0.0};
  try {
    emb.forward({1, codes, nums});
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("size"), std::string::npos) << e.what();
  }
}

TEST(FieldEmbedding, GradientOnlyReachesLookedUpColumns) {
  Rng init(39);
  FieldEmbedding emb("emb", mixed_schema(), 2, false, init);
  const std::vector<int> codes{1, 1, 1, 3};  // rows: (1, 1), (1, 3)
  const std::vector<double> nums{1.0, 2.0, 3.0, 4.0};
  ops::sum(emb.forward({2, codes, nums})).backward();
  const auto g0 = emb.table(0).tensor().grad();
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g0[d * 3 + c], c == 1 ? 2.0 : 0.0);
  }
  const auto g2 = emb.table(2).tensor().grad();
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g2[d * 4 + c], (c == 1 || c == 3) ? 1.0 : 0.0);
  }
}

TEST(FieldEmbedding, NumericEmbeddingIsLinear) {
  Rng init(40);
  Rng rng(41);
  std::vector<FieldSpec> schema{{"x", FieldKind::kNumeric, 0}, {"y", FieldKind::kNumeric, 0}};
  FieldEmbedding emb("emb", schema, 4, false, init);
  for (int t = 0; t < 100; ++t) {
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3), s = rng.uniform(-2, 2);
    const std::vector<double> u{a, b}, su{s * a, s * b}, w{b, a}, uw{a + b, b + a};
    const auto eu = vals(emb.forward({1, {}, u}));
    const auto esu = vals(emb.forward({1, {}, su}));
    const auto ew = vals(emb.forward({1, {}, w}));
    const auto euw = vals(emb.forward({1, {}, uw}));
    for (std::size_t i = 0; i < eu.size(); ++i) {
      EXPECT_NEAR(esu[i], s * eu[i], 1e-12);
      EXPECT_NEAR(euw[i], eu[i] + ew[i], 1e-12);
    }
  }
}

TEST(FieldEmbedding, EmbedRowIsFieldByDim) {
  Rng init(42);
  FieldEmbedding emb("emb", mixed_schema(), 2, false, init);
  const std::vector<int> codes{2, 0};
  const std::vector<double> nums{1.5, -0.5};
  const Tensor row = embed_row(emb, codes, nums);
  EXPECT_EQ(row.shape(), (Shape{4, 2}));
  EXPECT_EQ(vals(row), vals(emb.forward({1, codes, nums})));
  FieldEmbedding raw("raw", mixed_schema(), 2, true, init);
  EXPECT_THROW(embed_row(raw, codes, nums), std::logic_error);
}

TEST(FieldEmbedding, RejectsDegenerateSchemas) {
  Rng init(43);
  EXPECT_THROW(FieldEmbedding("e", {}, 2, false, init), std::invalid_argument);
  EXPECT_THROW(FieldEmbedding("e", mixed_schema(), 0, false, init), std::invalid_argument);
  EXPECT_THROW(FieldEmbedding("e", {{"c", FieldKind::kCategorical, 1}}, 2, false, init), std::invalid_argument);
}

TEST(Linear, ForwardIsAffine) {
  Rng init(44);
  Linear lin("lin", 2, 3, init);
  set_values(lin.weight(), {1, 2, 3, 4, 5, 6});
  set_values(lin.bias(), {0.5, 0, -0.5});
  EXPECT_EQ(vals(lin.forward(Tensor::from({1, 2}, {1, -1}))), (std::vector<double>{-2.5, -3, -3.5}));
  EXPECT_THROW(lin.forward(Tensor::zeros({1, 3})), ShapeError);
}
