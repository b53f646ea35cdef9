#pragma once

// Dense numeric kernels behind the autograd ops.
//
// Every kernel exists twice: `serial::` is the straightforward reference and
// `parallel::` distributes independent output rows over OpenMP threads. Both
// accumulate each output element in the same order, so their results are
// bit-identical for any thread count. The unqualified entry points dispatch
// to the parallel version once the work is large enough to amortize a team.
//
// Shapes are row-major. `accumulate` adds into C instead of overwriting it.
//   gemm_nn: C[M,N] (+)= A[M,K] * B[K,N]
//   gemm_nt: C[M,N] (+)= A[M,K] * B[N,K]^T
//   gemm_tn: C[M,N] (+)= A[K,M]^T * B[K,N]
//   ghost_norm_forward: standardizes x[rows, cols] over the rows of each
//     segment (biased variance); stores per-segment mean and 1/sqrt(var+eps).
//   ghost_norm_backward: dx += Jacobian^T dy given the normalized output y.
//   pairwise_inner: out[b, p] = <e[b,i,:], e[b,j,:]> over field pairs i<j in
//     lexicographic order.

#include <cstddef>
#include <span>

namespace tabplus::kernels {

struct Segment {
  std::size_t begin;
  std::size_t size;
};

using In = std::span<const double>;
using Out = std::span<double>;

namespace serial {
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std);
void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx);
void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out);
}  // namespace serial

namespace parallel {
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std);
void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx);
void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out);
}  // namespace parallel

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate);
void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std);
void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx);
void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out);

/// Threads available to the dispatching entry points (OpenMP ICV of the caller).
int max_threads();

}  // namespace tabplus::kernels
