#pragma once

// Independent reference implementations that the library is checked against.
// Nothing here calls the code under test except to obtain the value being
// compared.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabplus/rng.hpp"
#include "tabplus/tensor.hpp"

namespace oracle {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
inline constexpr double kFdExempt = 1e-8;

/// Scalar-valued function of leaf tensors, rebuilt from scratch on every call.
using ScalarFn = std::function<tabplus::Tensor(const std::vector<tabplus::Tensor>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;  ///< entries compared (exempt ones excluded)
};

/// Compares backward() against central differences at h = 1e-5 for every
/// entry of every input. Entries where both derivatives are below 1e-8 in
/// magnitude are exempt; elsewhere the error is |a - n| / max(|a|, |n|).
GradCheck check_gradients(const ScalarFn& f, const std::vector<tabplus::Tensor>& inputs);

/// Reduces any output to a scalar with fixed random weights, so every
/// output entry contributes a distinct cotangent.
tabplus::Tensor project(const tabplus::Tensor& y, std::uint64_t seed);

std::vector<double> uniform(tabplus::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0);
tabplus::Tensor random_tensor(tabplus::Rng& rng, tabplus::Shape shape, double lo = -1.0, double hi = 1.0);

/// Values bounded away from zero, for ops with a kink at the origin.
tabplus::Tensor random_away_from_zero(tabplus::Rng& rng, tabplus::Shape shape, double gap = 1e-3);

/// Batch norm over all rows of x[rows, cols] with biased variance, written
/// as two plain loops per column.
std::vector<double> plain_batch_norm(std::span<const double> x, std::size_t rows, std::size_t cols,
                                     std::span<const double> scale, std::span<const double> shift,
                                     double eps);

/// Mean over all (positive, negative) pairs of [s+ > s-] + 0.5 [s+ == s-].
double pairwise_auroc(std::span<const double> scores, std::span<const int> labels);

/// log-sum-exp cross entropy evaluated row by row.
double direct_cross_entropy(std::span<const double> logits, std::size_t cols, std::span<const int> labels);

/// Dense multi-head self-attention of one row e[F, m] written with loops.
/// Weights are stored [in, out]; q, k, v are [m, h*m], out is [h*m, m].
std::vector<double> direct_attention(std::span<const double> e, std::size_t F, std::size_t m,
                                     std::size_t heads, std::span<const double> q,
                                     std::span<const double> k, std::span<const double> v,
                                     std::span<const double> out_w, std::span<const double> out_b,
                                     std::span<const double> residual, bool activation, double slope);

/// A named gradient-check case: `make` draws fresh inputs and returns the
/// function under test with them.
struct OpCase {
  std::string name;
  std::function<std::pair<ScalarFn, std::vector<tabplus::Tensor>>(tabplus::Rng&)> make;
};

/// One case per differentiable op and layer. Each draws a random small shape.
std::vector<OpCase> gradient_cases();

}  // namespace oracle
