#include <gtest/gtest.h>
#include <omp.h>

#include <cstring>

#include "oracles.hpp"
#include "tabplus/kernels.hpp"
#include "tabplus/layers.hpp"

using namespace tabplus;
namespace k = tabplus::kernels;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Threads {
  explicit Threads(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
  int saved;
};

}  // namespace

class KernelThreads : public ::testing::TestWithParam<int> {};

TEST_P(KernelThreads, GemmVariantsMatchSerialBitForBit) {
  Threads t(GetParam());
  Rng rng(21);
  for (const auto [M, N, K] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 5, 3}, {64, 33, 17}, {300, 40, 129}}) {
    const auto A = oracle::uniform(rng, M * K), B = oracle::uniform(rng, K * N);
    const auto Bt = oracle::uniform(rng, N * K), At = oracle::uniform(rng, K * M);
    const auto C0 = oracle::uniform(rng, M * N);
    for (const bool acc : {false, true}) {
      auto s = C0, p = C0;
      k::serial::gemm_nn(M, N, K, A, B, s, acc);
      k::parallel::gemm_nn(M, N, K, A, B, p, acc);
      EXPECT_TRUE(bit_equal(s, p)) << "nn " << M << "x" << N << "x" << K;
      s = C0, p = C0;
      k::serial::gemm_nt(M, N, K, A, Bt, s, acc);
      k::parallel::gemm_nt(M, N, K, A, Bt, p, acc);
      EXPECT_TRUE(bit_equal(s, p)) << "nt";
      s = C0, p = C0;
      k::serial::gemm_tn(M, N, K, At, B, s, acc);
      k::parallel::gemm_tn(M, N, K, At, B, p, acc);
      EXPECT_TRUE(bit_equal(s, p)) << "tn";
      // The dispatching entry point agrees as well.
      auto d = C0;
      k::gemm_nn(M, N, K, A, B, d, acc);
      s = C0;
      k::serial::gemm_nn(M, N, K, A, B, s, acc);
      EXPECT_TRUE(bit_equal(s, d));
    }
  }
}

TEST_P(KernelThreads, GhostNormMatchesSerialBitForBit) {
  Threads t(GetParam());
  Rng rng(22);
  for (const auto [rows, cols, ghost] : {std::array<std::size_t, 3>{9, 3, 4}, {1024, 31, 8}, {2047, 5, 8}}) {
    const auto segs = GhostBatchNorm::segments(rows, ghost);
    const auto x = oracle::uniform(rng, rows * cols, -3, 3);
    const auto dy = oracle::uniform(rng, rows * cols);
    std::vector<double> ys(rows * cols), yp(rows * cols), ms(segs.size() * cols), mp(ms.size()), is(ms.size()),
        ip(ms.size());
    k::serial::ghost_norm_forward(cols, segs, x, 1e-5, ys, ms, is);
    k::parallel::ghost_norm_forward(cols, segs, x, 1e-5, yp, mp, ip);
    EXPECT_TRUE(bit_equal(ys, yp));
    EXPECT_TRUE(bit_equal(ms, mp));
    EXPECT_TRUE(bit_equal(is, ip));
    std::vector<double> ds(rows * cols, 0.5), dp(rows * cols, 0.5);
    k::serial::ghost_norm_backward(cols, segs, ys, is, dy, ds);
    k::parallel::ghost_norm_backward(cols, segs, yp, ip, dy, dp);
    EXPECT_TRUE(bit_equal(ds, dp));
  }
}

TEST_P(KernelThreads, PairwiseInnerMatchesSerialBitForBit) {
  Threads t(GetParam());
  Rng rng(23);
  const std::size_t batch = 200, fields = 17, dim = 8;
  const auto e = oracle::uniform(rng, batch * fields * dim);
  std::vector<double> s(batch * fields * (fields - 1) / 2), p(s.size());
  k::serial::pairwise_inner(batch, fields, dim, e, s);
  k::parallel::pairwise_inner(batch, fields, dim, e, p);
  EXPECT_TRUE(bit_equal(s, p));
}

INSTANTIATE_TEST_SUITE_P(TeamSizes, KernelThreads, ::testing::Values(1, 2, 3, 8));

TEST(Kernels, GemmAgainstTripleLoop) {
  Rng rng(24);
  const std::size_t M = 5, N = 4, K = 6;
  const auto A = oracle::uniform(rng, M * K), B = oracle::uniform(rng, K * N);
  std::vector<double> C(M * N);
  k::serial::gemm_nn(M, N, K, A, B, C, false);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      double s = 0;
      for (std::size_t q = 0; q < K; ++q) s += A[i * K + q] * B[q * N + j];
      EXPECT_NEAR(C[i * N + j], s, 1e-14);
    }
  }
}
