// Serial reference vs. parallel kernels. Shapes mirror the reception model's
// hot loops: a 128-sample batch of 25-message windows at width 64/128.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "aisgap/kernels.hpp"

namespace {

using aisgap::kernels::Trans;

std::vector<double> random_vector(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto n = static_cast<std::size_t>(state.range(1));
    const auto k = static_cast<std::size_t>(state.range(2));
    const auto a = random_vector(m * k, 1);
    const auto b = random_vector(k * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        if constexpr (Reference) {
            aisgap::kernels::reference::gemm(Trans::No, Trans::No, m, n, k, 1.0, a.data(), k,
                                             b.data(), n, 0.0, c.data(), n);
        } else {
            aisgap::kernels::gemm(Trans::No, Trans::No, m, n, k, 1.0, a.data(), k, b.data(), n,
                                  0.0, c.data(), n);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOPS"] = benchmark::Counter(
        2.0 * static_cast<double>(m * n * k), benchmark::Counter::kIsIterationInvariantRate,
        benchmark::Counter::kIs1000);
}

void BM_GemmTransposedA(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto n = static_cast<std::size_t>(state.range(1));
    const auto k = static_cast<std::size_t>(state.range(2));
    const auto a = random_vector(k * m, 1);
    const auto b = random_vector(k * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        aisgap::kernels::gemm(Trans::Yes, Trans::No, m, n, k, 1.0, a.data(), m, b.data(), n, 0.0,
                              c.data(), n);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["GFLOPS"] = benchmark::Counter(
        2.0 * static_cast<double>(m * n * k), benchmark::Counter::kIsIterationInvariantRate,
        benchmark::Counter::kIs1000);
}

template <bool Reference>
void BM_LayerNorm(benchmark::State& state) {
    const std::size_t rows = 3200;
    const auto cols = static_cast<std::size_t>(state.range(0));
    const auto x = random_vector(rows * cols, 3);
    std::vector<double> gamma(cols, 1.0), beta(cols, 0.0), xhat(rows * cols), y(rows * cols),
        inv(rows);
    for (auto _ : state) {
        if constexpr (Reference) {
            aisgap::kernels::reference::layer_norm_rows(x, gamma, beta, rows, cols, 1e-5, xhat,
                                                        inv, y);
        } else {
            aisgap::kernels::layer_norm_rows(x, gamma, beta, rows, cols, 1e-5, xhat, inv, y);
        }
        benchmark::DoNotOptimize(y.data());
    }
}

template <bool Reference>
void BM_Softmax(benchmark::State& state) {
    const std::size_t rows = 128 * 4 * 25;
    const std::size_t cols = 25;
    const auto x0 = random_vector(rows * cols, 4);
    std::vector<double> x = x0;
    for (auto _ : state) {
        x = x0;
        if constexpr (Reference) {
            aisgap::kernels::reference::softmax_rows(x, rows, cols);
        } else {
            aisgap::kernels::softmax_rows(x, rows, cols);
        }
        benchmark::DoNotOptimize(x.data());
    }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Args({3200, 64, 64})->Args({3200, 128, 128});
BENCHMARK(BM_Gemm<false>)
    ->Name("gemm/parallel")
    ->Args({3200, 64, 64})
    ->Args({3200, 128, 128})
    ->Args({3200, 256, 128});
BENCHMARK(BM_GemmTransposedA)->Name("gemm_tn/parallel")->Args({64, 64, 3200})->Args({128, 128, 3200});
BENCHMARK(BM_LayerNorm<true>)->Name("layer_norm/reference")->Arg(64)->Arg(128);
BENCHMARK(BM_LayerNorm<false>)->Name("layer_norm/parallel")->Arg(64)->Arg(128);
BENCHMARK(BM_Softmax<true>)->Name("softmax/reference");
BENCHMARK(BM_Softmax<false>)->Name("softmax/parallel");

BENCHMARK_MAIN();
