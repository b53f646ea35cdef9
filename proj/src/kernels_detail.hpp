#pragma once

// Per-row and per-segment routines shared by the serial and parallel kernels,
// so both paths perform the same arithmetic in the same order.

#include <algorithm>
#include <cmath>

#include "tabplus/kernels.hpp"

namespace tabplus::kernels::detail {

inline void gemm_nn_row(std::size_t i, std::size_t N, std::size_t K, In A, In B, Out C,
                        bool accumulate) {
  double* __restrict c = C.data() + i * N;
  if (!accumulate) std::fill(c, c + N, 0.0);
  const double* a = A.data() + i * K;
  for (std::size_t k = 0; k < K; ++k) {
    const double aik = a[k];
    const double* __restrict b = B.data() + k * N;
    for (std::size_t j = 0; j < N; ++j) c[j] += aik * b[j];
  }
}

inline void gemm_nt_row(std::size_t i, std::size_t N, std::size_t K, In A, In B, Out C,
                        bool accumulate) {
  const double* a = A.data() + i * K;
  double* c = C.data() + i * N;
  for (std::size_t j = 0; j < N; ++j) {
    const double* b = B.data() + j * K;
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += a[k] * b[k];
    c[j] = accumulate ? c[j] + s : s;
  }
}

inline void pairwise_inner_row(std::size_t b, std::size_t fields, std::size_t dim, In e,
                               Out out) {
  const std::size_t pairs = fields * (fields - 1) / 2;
  const double* eb = e.data() + b * fields * dim;
  double* ob = out.data() + b * pairs;
  std::size_t p = 0;
  for (std::size_t i = 0; i < fields; ++i) {
    for (std::size_t j = i + 1; j < fields; ++j, ++p) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += eb[i * dim + k] * eb[j * dim + k];
      ob[p] = s;
    }
  }
}

inline void norm_segment_forward(std::size_t cols, const Segment& seg, std::size_t seg_index, In x,
                          double eps, Out y, Out mean, Out inv_std) {
  double* mu = mean.data() + seg_index * cols;
  double* inv = inv_std.data() + seg_index * cols;
  std::fill(mu, mu + cols, 0.0);
  std::fill(inv, inv + cols, 0.0);
  for (std::size_t r = seg.begin; r < seg.begin + seg.size; ++r) {
    const double* row = x.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) mu[c] += row[c];
  }
  const double n = static_cast<double>(seg.size);
  for (std::size_t c = 0; c < cols; ++c) mu[c] /= n;
  // `inv` holds the sum of squared deviations until it is inverted below.
  for (std::size_t r = seg.begin; r < seg.begin + seg.size; ++r) {
    const double* row = x.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mu[c];
      inv[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < cols; ++c) inv[c] = 1.0 / std::sqrt(inv[c] / n + eps);
  for (std::size_t r = seg.begin; r < seg.begin + seg.size; ++r) {
    const double* row = x.data() + r * cols;
    double* out = y.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] = (row[c] - mu[c]) * inv[c];
  }
}

inline void norm_segment_backward(std::size_t cols, const Segment& seg, std::size_t seg_index, In y,
                           In inv_std, In dy, Out dx, double* sum_dy, double* sum_dyy) {
  std::fill(sum_dy, sum_dy + cols, 0.0);
  std::fill(sum_dyy, sum_dyy + cols, 0.0);
  for (std::size_t r = seg.begin; r < seg.begin + seg.size; ++r) {
    const double* g = dy.data() + r * cols;
    const double* yr = y.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      sum_dy[c] += g[c];
      sum_dyy[c] += g[c] * yr[c];
    }
  }
  const double n = static_cast<double>(seg.size);
  const double* inv = inv_std.data() + seg_index * cols;
  for (std::size_t r = seg.begin; r < seg.begin + seg.size; ++r) {
    const double* g = dy.data() + r * cols;
    const double* yr = y.data() + r * cols;
    double* out = dx.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] += inv[c] * (g[c] - sum_dy[c] / n - yr[c] * sum_dyy[c] / n);
    }
  }
}

}  // namespace tabplus::kernels::detail
