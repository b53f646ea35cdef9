#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tabplus/ops.hpp"

using namespace tabplus;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, MatmulWithIdentityIsUnchanged) {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  EXPECT_EQ(vals(ops::matmul(a, eye)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Tensor, LeakyReluDefinition) {
  const Tensor x = Tensor::from({3}, {-1, 0, 2});
  const auto y = vals(ops::leaky_relu(x, 0.01));
  EXPECT_DOUBLE_EQ(y[0], -0.01);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 2.0);
}

TEST(Tensor, LeakyReluPreservesSign) {
  Rng rng(3);
  const Tensor x = oracle::random_tensor(rng, {1000}, -5, 5);
  const auto y = ops::leaky_relu(x, 0.2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(std::signbit(x.values()[i]), std::signbit(y.values()[i]));
    EXPECT_EQ(x.values()[i] > 0, y.values()[i] > 0);
  }
}

TEST(Tensor, SoftmaxOfZerosIsUniform) {
  for (double v : vals(ops::softmax(Tensor::zeros({3})))) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Tensor, SoftmaxRowsSumToOne) {
  Rng rng(4);
  const Tensor x = oracle::random_tensor(rng, {50, 7}, -30, 30);
  const auto y = ops::softmax(x);
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += y.values()[r * 7 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Tensor, SumGradientIsOnes) {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  ops::sum(x).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 1, 1}));
}

TEST(Tensor, SquareGradient) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  ops::sum(ops::mul(x, x)).backward();
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{2, 4}));
}

TEST(Tensor, RepeatedBackwardAccumulates) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  const Tensor loss = ops::sum(ops::mul(x, x));
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 8.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, UnreachableLeafHasZeroGrad) {
  Tensor used = Tensor::from({2}, {1, 2}, true);
  Tensor unused = Tensor::from({2}, {3, 4}, true);
  ops::sum(used).backward();
  EXPECT_TRUE(used.has_grad());
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Tensor, NonScalarBackwardThrows) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(ops::mul(x, x).backward(), ShapeError);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = ops::sum(x);
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, ShapeErrorNamesOpAndShapes) {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({2, 3});
  try {
    ops::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.op(), "matmul");
    EXPECT_EQ(e.lhs(), (Shape{2, 3}));
    EXPECT_EQ(e.rhs(), (Shape{2, 3}));
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
  }
  EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(ops::add_row(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  EXPECT_THROW(ops::reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
  EXPECT_THROW(ops::slice(Tensor::zeros({2, 3}), 1, 2, 2), ShapeError);
}

TEST(Tensor, NonFiniteValuesPropagateAndAreDetectable) {
  const Tensor x = Tensor::from({2}, {1.0, std::nan("")});
  const Tensor y = ops::affine(x, 2.0, 1.0);
  EXPECT_TRUE(std::isnan(y.values()[1]));
  EXPECT_FALSE(ops::all_finite(y));
  EXPECT_TRUE(ops::all_finite(Tensor::from({1}, {3.0})));
  EXPECT_FALSE(ops::all_finite(Tensor::from({1}, {INFINITY})));
}

TEST(Tensor, DropoutEvalIsIdentity) {
  Rng rng(5);
  const Tensor x = oracle::random_tensor(rng, {4, 4});
  EXPECT_EQ(vals(ops::dropout(x, 0.5, false, rng)), vals(x));
  EXPECT_EQ(vals(ops::dropout(x, 0.0, true, rng)), vals(x));
  EXPECT_THROW(ops::dropout(x, 1.0, true, rng), std::invalid_argument);
  EXPECT_THROW(ops::dropout(x, -0.1, true, rng), std::invalid_argument);
}

TEST(Tensor, DropoutExpectationMatchesInput) {
  Rng rng(6);
  const Tensor x = Tensor::from({4}, {1.0, -2.0, 0.5, 3.0});
  std::vector<double> mean(4, 0.0);
  const int masks = 20000;
  for (int i = 0; i < masks; ++i) {
    const auto y = ops::dropout(x, 0.5, true, rng);
    for (std::size_t j = 0; j < 4; ++j) mean[j] += y.values()[j] / masks;
  }
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(mean[j], x.values()[j], 0.02 * std::abs(x.values()[j]));
}

TEST(Tensor, CrossEntropyExamples) {
  const std::vector<int> zero{0};
  EXPECT_NEAR(ops::cross_entropy(Tensor::from({1, 2}, {0, 0}), zero).item(), std::log(2.0), 1e-15);
  EXPECT_LT(ops::cross_entropy(Tensor::from({1, 2}, {10, -10}), zero).item(), 1e-4);
}

TEST(Tensor, CrossEntropyMatchesLogSumExp) {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const std::size_t rows = 1 + rng.bounded(20), cols = 2 + rng.bounded(3);
    const Tensor z = oracle::random_tensor(rng, {rows, cols}, -20, 20);
    std::vector<int> labels(rows);
    for (auto& l : labels) l = int(rng.bounded(cols));
    EXPECT_NEAR(ops::cross_entropy(z, labels).item(), oracle::direct_cross_entropy(z.values(), cols, labels),
                1e-10);
  }
}

TEST(Tensor, CrossEntropyRejectsBadLabel) {
  const std::vector<int> labels{0, 2};
  try {
    ops::cross_entropy(Tensor::zeros({2, 2}), labels);
    FAIL();
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(Tensor, OuterAndInnerExamples) {
  EXPECT_EQ(vals(ops::outer_self(Tensor::from({1, 2}, {1, 2}))), (std::vector<double>{1, 2, 2, 4}));
  EXPECT_EQ(vals(ops::pairwise_inner(Tensor::from({1, 2, 2}, {1, 0, 0, 1}))), (std::vector<double>{0}));
  EXPECT_EQ(vals(ops::pairwise_inner(Tensor::from({1, 2, 2}, {1, 2, 1, 2}))), (std::vector<double>{5}));
  EXPECT_THROW(ops::pairwise_inner(Tensor::zeros({1, 1, 2})), ShapeError);
}

TEST(Tensor, PairwiseInnerOrderIsLexicographic) {
  // Fields e0 = [1], e1 = [2], e2 = [3]: pairs (0,1), (0,2), (1,2).
  EXPECT_EQ(vals(ops::pairwise_inner(Tensor::from({1, 3, 1}, {1, 2, 3}))), (std::vector<double>{2, 3, 6}));
}

TEST(Tensor, BatchStatistics) {
  const Tensor x = Tensor::from({3, 2}, {1, 10, 2, 20, 3, 60});
  EXPECT_EQ(vals(ops::batch_mean(x)), (std::vector<double>{2, 30}));
  const auto v = vals(ops::batch_variance(x));
  EXPECT_NEAR(v[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1], 1400.0 / 3.0, 1e-12);
}

// Every op and layer case from the oracle, on 20 random shapes each.
class GradientOracle : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientOracle, MatchesCentralDifferences) {
  const auto cases = oracle::gradient_cases();
  const auto& c = cases.at(GetParam());
  Rng rng(1000 + GetParam());
  for (int i = 0; i < 20; ++i) {
    auto [f, inputs] = c.make(rng);
    const auto r = oracle::check_gradients(f, inputs);
    EXPECT_LT(r.max_rel_error, oracle::kFdTolerance) << c.name << " draw " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientOracle, ::testing::Range<std::size_t>(0, oracle::gradient_cases().size()),
                         [](const auto& info) { return oracle::gradient_cases()[info.param].name; });

TEST(Tensor, TwoRowGhostSegmentMatchesClosedForm) {
  // Rows a, b: y_a = d / sqrt(d^2 + eps) with d = (a - b) / 2, y_b = -y_a,
  // so d(w_a y_a + w_b y_b)/da = (w_a - w_b) eps / (2 (d^2 + eps)^1.5).
  Rng rng(9);
  const double eps = 1e-5;
  for (int t = 0; t < 200; ++t) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const double wa = rng.uniform(-1, 1), wb = rng.uniform(-1, 1);
    Tensor x = Tensor::from({2, 1}, {a, b}, true);
    const kernels::Segment seg{0, 2};
    const Tensor y = ops::ghost_normalize(x, std::span(&seg, 1), eps).normalized;
    ops::sum(ops::mul(y, Tensor::from({2, 1}, {wa, wb}))).backward();
    const double d = (a - b) / 2;
    const double expect = (wa - wb) * eps / (2.0 * std::pow(d * d + eps, 1.5));
    EXPECT_NEAR(x.grad()[0], expect, 1e-9 * std::abs(expect) + 1e-15);
    EXPECT_NEAR(x.grad()[1], -expect, 1e-9 * std::abs(expect) + 1e-15);
  }
}
