// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS to vary threads.

#include <benchmark/benchmark.h>

#include "kgrec/numeric/kernels.hpp"
#include "kgrec/numeric/rng.hpp"

namespace k = kgrec::numeric::kernels;
using kgrec::numeric::Matrix;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    kgrec::numeric::Rng rng(seed);
    Matrix m(r, c);
    for (auto& x : m.values()) x = rng.uniform(-1.0, 1.0);
    return m;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, 64, 1), b = random_matrix(64, 64, 2);
    Matrix c(n, 64);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::parallel::gemm_nn(a, b, c);
        } else {
            k::serial::gemm_nn(a, b, c);
        }
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

template <bool Parallel>
void BM_CrossCompress(benchmark::State& state) {
    const auto batch = static_cast<std::size_t>(state.range(0));
    constexpr std::size_t d = 8;
    const Matrix v = random_matrix(batch, d, 3), e = random_matrix(batch, d, 4);
    const Matrix w_vv = random_matrix(d, 1, 5), w_ev = random_matrix(d, 1, 6);
    const Matrix w_ve = random_matrix(d, 1, 7), w_ee = random_matrix(d, 1, 8);
    const Matrix b_v = random_matrix(1, d, 9), b_e = random_matrix(1, d, 10);
    const k::CrossCompressWeights w{w_vv, w_ev, w_ve, w_ee, b_v, b_e};
    Matrix cross(batch, d * d), v_out(batch, d), e_out(batch, d);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::parallel::cross_compress_forward(v, e, w, cross, v_out, e_out);
        } else {
            k::serial::cross_compress_forward(v, e, w, cross, v_out, e_out);
        }
        benchmark::DoNotOptimize(v_out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}

}  // namespace

BENCHMARK(BM_GemmNN<false>)->Name("gemm_nn/serial")->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_GemmNN<true>)->Name("gemm_nn/parallel")->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_CrossCompress<false>)->Name("cross_compress/serial")->RangeMultiplier(8)->Range(64, 32768);
BENCHMARK(BM_CrossCompress<true>)->Name("cross_compress/parallel")->RangeMultiplier(8)->Range(64, 32768);

BENCHMARK_MAIN();
