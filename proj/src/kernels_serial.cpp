#include <algorithm>
#include <vector>

#include "kernels_detail.hpp"

namespace tabplus::kernels::serial {

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) detail::gemm_nn_row(i, N, K, A, B, C, accumulate);
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  for (std::size_t i = 0; i < M; ++i) detail::gemm_nt_row(i, N, K, A, B, C, accumulate);
}

// k-outer order streams A and B once; each C element still sums k ascending,
// which is the order the row-parallel version uses.
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  if (!accumulate) std::fill(C.begin(), C.begin() + static_cast<std::ptrdiff_t>(M * N), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double* a = A.data() + k * M;
    const double* __restrict b = B.data() + k * N;
    for (std::size_t i = 0; i < M; ++i) {
      const double aki = a[i];
      double* __restrict c = C.data() + i * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += aki * b[j];
    }
  }
}

void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std) {
  for (std::size_t s = 0; s < segments.size(); ++s) {
    detail::norm_segment_forward(cols, segments[s], s, x, eps, y, mean, inv_std);
  }
}

void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx) {
  std::vector<double> scratch(2 * cols);
  for (std::size_t s = 0; s < segments.size(); ++s) {
    detail::norm_segment_backward(cols, segments[s], s, y, inv_std, dy, dx, scratch.data(),
                                  scratch.data() + cols);
  }
}

void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out) {
  for (std::size_t b = 0; b < batch; ++b) detail::pairwise_inner_row(b, fields, dim, e, out);
}

}  // namespace tabplus::kernels::serial
