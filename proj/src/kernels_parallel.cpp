#include <omp.h>

#include <vector>

#include "kernels_detail.hpp"

namespace tabplus::kernels {

namespace parallel {

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(M);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    detail::gemm_nn_row(static_cast<std::size_t>(i), N, K, A, B, C, accumulate);
  }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(M);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    detail::gemm_nt_row(static_cast<std::size_t>(i), N, K, A, B, C, accumulate);
  }
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(M);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* __restrict c = C.data() + i * N;
    if (!accumulate) std::fill(c, c + N, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double aki = A[k * M + i];
      const double* __restrict b = B.data() + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += aki * b[j];
    }
  }
}

void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std) {
  const auto count = static_cast<std::ptrdiff_t>(segments.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto index = static_cast<std::size_t>(s);
    detail::norm_segment_forward(cols, segments[index], index, x, eps, y, mean, inv_std);
  }
}

void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx) {
  const auto count = static_cast<std::ptrdiff_t>(segments.size());
#pragma omp parallel
  {
    std::vector<double> scratch(2 * cols);
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      const auto index = static_cast<std::size_t>(s);
      detail::norm_segment_backward(cols, segments[index], index, y, inv_std, dy, dx,
                                    scratch.data(), scratch.data() + cols);
    }
  }
}

void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out) {
  const auto rows = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < rows; ++b) {
    detail::pairwise_inner_row(static_cast<std::size_t>(b), fields, dim, e, out);
  }
}

}  // namespace parallel

namespace {

// Below this many multiply-adds a thread team costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

bool use_parallel(std::size_t work) { return work >= kParallelWork && max_threads() > 1; }

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  if (use_parallel(M * N * K)) {
    parallel::gemm_nn(M, N, K, A, B, C, accumulate);
  } else {
    serial::gemm_nn(M, N, K, A, B, C, accumulate);
  }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  if (use_parallel(M * N * K)) {
    parallel::gemm_nt(M, N, K, A, B, C, accumulate);
  } else {
    serial::gemm_nt(M, N, K, A, B, C, accumulate);
  }
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, In A, In B, Out C, bool accumulate) {
  if (use_parallel(M * N * K)) {
    parallel::gemm_tn(M, N, K, A, B, C, accumulate);
  } else {
    serial::gemm_tn(M, N, K, A, B, C, accumulate);
  }
}

void ghost_norm_forward(std::size_t cols, std::span<const Segment> segments, In x, double eps,
                        Out y, Out mean, Out inv_std) {
  if (use_parallel(x.size() * 4)) {
    parallel::ghost_norm_forward(cols, segments, x, eps, y, mean, inv_std);
  } else {
    serial::ghost_norm_forward(cols, segments, x, eps, y, mean, inv_std);
  }
}

void ghost_norm_backward(std::size_t cols, std::span<const Segment> segments, In y, In inv_std,
                         In dy, Out dx) {
  if (use_parallel(y.size() * 4)) {
    parallel::ghost_norm_backward(cols, segments, y, inv_std, dy, dx);
  } else {
    serial::ghost_norm_backward(cols, segments, y, inv_std, dy, dx);
  }
}

void pairwise_inner(std::size_t batch, std::size_t fields, std::size_t dim, In e, Out out) {
  if (use_parallel(batch * fields * fields * dim / 2)) {
    parallel::pairwise_inner(batch, fields, dim, e, out);
  } else {
    serial::pairwise_inner(batch, fields, dim, e, out);
  }
}

}  // namespace tabplus::kernels
