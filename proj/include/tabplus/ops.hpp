#pragma once

#include <span>
#include <vector>

#include "tabplus/kernels.hpp"
#include "tabplus/rng.hpp"
#include "tabplus/tensor.hpp"

// Differentiable operations. All tensors are row-major 64-bit floats; every
// op validates shapes and throws ShapeError naming itself and both shapes.
namespace tabplus::ops {

/// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [B,m,k] x [B,k,n] -> [B,m,n]; with transpose_b, b is [B,n,k].
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// x[..., n] + row[n], broadcast over all leading axes.
Tensor add_row(const Tensor& x, const Tensor& row);
/// x[..., n] * row[n], broadcast over all leading axes.
Tensor mul_row(const Tensor& x, const Tensor& row);
/// x * s where s holds exactly one element.
Tensor scale(const Tensor& x, const Tensor& s);
/// a * x + c with constant a, c.
Tensor affine(const Tensor& x, double a, double c);

Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor sigmoid(const Tensor& x);
/// Softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Inverted dropout: kept entries are scaled by 1/(1-rate). Identity when
/// `train` is false or rate is 0. Requires rate in [0, 1).
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sums out `axis` (the axis is removed from the shape).
Tensor sum_axis(const Tensor& x, std::size_t axis);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Rank-2 transpose.
Tensor transpose(const Tensor& x);

/// Column means of x[b, n] -> [n].
Tensor batch_mean(const Tensor& x);
/// Biased column variances of x[b, n] -> [n].
Tensor batch_variance(const Tensor& x);

struct GhostNormResult {
  Tensor normalized;
  std::vector<double> mean;      ///< [segments, cols]
  std::vector<double> variance;  ///< [segments, cols], biased
};
/// Standardizes x[b, n] within each row segment using that segment's own
/// statistics: (x - mean) / sqrt(var + eps).
GhostNormResult ghost_normalize(const Tensor& x, std::span<const kernels::Segment> segments,
                                double eps);

/// e[B, F, m] -> [B, F(F-1)/2] inner products of field pairs i<j.
Tensor pairwise_inner(const Tensor& e);
/// s[B, m] -> [B, m*m], row b is flatten(s_b s_b^T).
Tensor outer_self(const Tensor& s);

/// Mean over rows of -log softmax(logits)[label].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

bool all_finite(const Tensor& x);

}  // namespace tabplus::ops
