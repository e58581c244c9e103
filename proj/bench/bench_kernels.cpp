// Serial reference kernels against their OpenMP counterparts, and one SAE
// training step at the sizes used by the recovery benchmark.

#include <benchmark/benchmark.h>

#include <random>

#include "rvec/kernels.hpp"
#include "rvec/sae.hpp"

using namespace rvec;

namespace {

MatrixD random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD m(rows, cols);
  for (double& x : m.flat()) x = normal(rng);
  return m;
}

// state.range(0) is the batch size; range(1) selects reference (0) or parallel (1).
void set_label(benchmark::State& state) { state.SetLabel(state.range(1) ? "parallel" : "reference"); }

void BM_MatmulBias(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD a = random_matrix(n, 128, 1), b = random_matrix(128, 512, 2);
  const std::vector<double> bias(512, 0.1);
  MatrixD out;
  for (auto _ : state) {
    if (state.range(1)) kernels::matmul_bias(a, b, bias, out);
    else kernels::reference::matmul_bias(a, b, bias, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_label(state);
}

void BM_MatmulTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD a = random_matrix(n, 128, 3), g = random_matrix(n, 512, 4);
  MatrixD out;
  for (auto _ : state) {
    if (state.range(1)) kernels::matmul_tn(a, g, out);
    else kernels::reference::matmul_tn(a, g, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_label(state);
}

void BM_MatmulNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD g = random_matrix(n, 512, 5), b = random_matrix(128, 512, 6);
  MatrixD out;
  for (auto _ : state) {
    if (state.range(1)) kernels::matmul_nt(g, b, out);
    else kernels::reference::matmul_nt(g, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  set_label(state);
}

void BM_ClusterDistanceSums(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  MatrixD x = random_matrix(n, 64, 7);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    for (double& v : x.row(r)) v /= std::sqrt(s);
  }
  std::vector<std::size_t> cluster(n);
  for (std::size_t i = 0; i < n; ++i) cluster[i] = i % 3;
  for (auto _ : state) {
    auto out = state.range(1) ? kernels::cluster_distance_sums(x, cluster, 3)
                              : kernels::reference::cluster_distance_sums(x, cluster, 3);
    benchmark::DoNotOptimize(out.data());
  }
  set_label(state);
}

void BM_SoftmaxEntropy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD logits = random_matrix(n, 1000, 8);
  std::vector<double> h(n);
  MatrixD grad;
  for (auto _ : state) {
    if (state.range(1)) kernels::softmax_entropy_rows(logits, h, &grad);
    else kernels::reference::softmax_entropy_rows(logits, h, &grad);
    benchmark::DoNotOptimize(grad.data());
  }
  set_label(state);
}

void BM_SaeLossAndGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const MatrixD batch = random_matrix(n, 128, 10);
  sae::SaeParams p{random_matrix(128, 64, 11), std::vector<double>(64, 0.0), random_matrix(64, 128, 12),
                   std::vector<double>(128, 0.0)};
  sae::SaeGradients g = p;
  const sae::SparsityPenalty penalty{sae::SparsityPenalty::Kind::l1, 2e-3, 0.0};
  for (auto _ : state) {
    auto rep = sae::loss(p, batch, penalty, &g);
    benchmark::DoNotOptimize(rep);
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {256, 1024})
    for (long impl : {0, 1}) b->Args({n, impl});
}

}  // namespace

BENCHMARK(BM_MatmulBias)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulTN)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MatmulNT)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ClusterDistanceSums)->Args({1000, 0})->Args({1000, 1})->Args({4000, 0})->Args({4000, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SoftmaxEntropy)->Apply(sizes)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SaeLossAndGradient)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
