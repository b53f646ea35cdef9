// Serial reference kernels against their OpenMP versions.
//
// Both variants run the same arithmetic in the same order per output element,
// so the comparison isolates scheduling overhead and thread speed-up. Thread
// count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "tabplus/kernels.hpp"
#include "tabplus/layers.hpp"
#include "tabplus/rng.hpp"

namespace {

namespace k = tabplus::kernels;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  tabplus::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

// Batch-by-width shapes of the first hidden layers: rows, in, out.
template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto M = std::size_t(state.range(0)), K = std::size_t(state.range(1)), N = std::size_t(state.range(2));
  const auto A = filled(M * K, 1), B = filled(K * N, 2);
  std::vector<double> C(M * N);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::gemm_nn(M, N, K, A, B, C, false);
    } else {
      k::serial::gemm_nn(M, N, K, A, B, C, false);
    }
    benchmark::DoNotOptimize(C.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(M * N * K));
}

template <bool Parallel>
void BM_GemmBackwardWeights(benchmark::State& state) {
  const auto M = std::size_t(state.range(0)), K = std::size_t(state.range(1)), N = std::size_t(state.range(2));
  const auto X = filled(M * K, 3), dY = filled(M * N, 4);
  std::vector<double> dW(K * N);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::gemm_tn(K, N, M, X, dY, dW, false);
    } else {
      k::serial::gemm_tn(K, N, M, X, dY, dW, false);
    }
    benchmark::DoNotOptimize(dW.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(M * N * K));
}

template <bool Parallel>
void BM_GhostNorm(benchmark::State& state) {
  const auto rows = std::size_t(state.range(0)), cols = std::size_t(state.range(1));
  const auto ghost = std::size_t(state.range(2));
  const auto segs = tabplus::GhostBatchNorm::segments(rows, ghost);
  const auto x = filled(rows * cols, 5), dy = filled(rows * cols, 6);
  std::vector<double> y(rows * cols), mean(segs.size() * cols), inv(segs.size() * cols), dx(rows * cols);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::ghost_norm_forward(cols, segs, x, 1e-5, y, mean, inv);
      k::parallel::ghost_norm_backward(cols, segs, y, inv, dy, dx);
    } else {
      k::serial::ghost_norm_forward(cols, segs, x, 1e-5, y, mean, inv);
      k::serial::ghost_norm_backward(cols, segs, y, inv, dy, dx);
    }
    benchmark::DoNotOptimize(dx.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(rows * cols));
}

template <bool Parallel>
void BM_PairwiseInner(benchmark::State& state) {
  const auto batch = std::size_t(state.range(0)), fields = std::size_t(state.range(1));
  const std::size_t dim = 16;
  const auto e = filled(batch * fields * dim, 7);
  std::vector<double> out(batch * fields * (fields - 1) / 2);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::pairwise_inner(batch, fields, dim, e, out);
    } else {
      k::serial::pairwise_inner(batch, fields, dim, e, out);
    }
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(out.size() * dim));
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1024, 456, 256})->Args({1024, 256, 192})->Args({2048, 1024, 512})->Args({64, 64, 64});
  b->Unit(benchmark::kMicrosecond);
}

void norm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1024, 256, 8})->Args({2048, 512, 64})->Args({4096, 1024, 256});
  b->Unit(benchmark::kMicrosecond);
}

void pair_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1024, 57})->Args({2048, 14})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm_nn/serial")->Apply(gemm_shapes);
BENCHMARK(BM_Gemm<true>)->Name("gemm_nn/parallel")->Apply(gemm_shapes);
BENCHMARK(BM_GemmBackwardWeights<false>)->Name("gemm_tn/serial")->Apply(gemm_shapes);
BENCHMARK(BM_GemmBackwardWeights<true>)->Name("gemm_tn/parallel")->Apply(gemm_shapes);
BENCHMARK(BM_GhostNorm<false>)->Name("ghost_norm/serial")->Apply(norm_shapes);
BENCHMARK(BM_GhostNorm<true>)->Name("ghost_norm/parallel")->Apply(norm_shapes);
BENCHMARK(BM_PairwiseInner<false>)->Name("pairwise_inner/serial")->Apply(pair_shapes);
BENCHMARK(BM_PairwiseInner<true>)->Name("pairwise_inner/parallel")->Apply(pair_shapes);

BENCHMARK_MAIN();
