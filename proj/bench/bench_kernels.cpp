// OpenMP kernels against their serial references, at the regressor sizes of
// the shipped scenarios (6, 62 and 314 components) and a long sample window.

#include "aimreg/kernels.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

namespace {

using aimreg::Matrix;
using aimreg::Vector;

Matrix random_rows(Eigen::Index n, Eigen::Index d) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(n, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = u(rng);
    }
    return m;
}

Vector weights(Eigen::Index n) {
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i) = std::pow(0.99, static_cast<double>(n - i - 1));
    }
    return w;
}

template <bool Parallel>
void BM_WeightedGram(benchmark::State& state) {
    const auto d = static_cast<Eigen::Index>(state.range(0));
    const Matrix rows = random_rows(1000, d);
    const Vector w = weights(1000);
    for (auto _ : state) {
        Matrix g = Parallel ? aimreg::kernels::weighted_gram(rows, w)
                            : aimreg::kernels::reference::weighted_gram(rows, w);
        benchmark::DoNotOptimize(g.data());
    }
    state.counters["threads"] = Parallel ? omp_get_max_threads() : 1;
}

template <bool Parallel>
void BM_WeightedCross(benchmark::State& state) {
    const auto d = static_cast<Eigen::Index>(state.range(0));
    const Matrix rows = random_rows(1000, d);
    const Matrix out = random_rows(1000, 1);
    const Vector w = weights(1000);
    for (auto _ : state) {
        Matrix c = Parallel ? aimreg::kernels::weighted_cross(rows, w, out)
                            : aimreg::kernels::reference::weighted_cross(rows, w, out);
        benchmark::DoNotOptimize(c.data());
    }
}

template <bool Parallel>
void BM_ForgettingUpdate(benchmark::State& state) {
    const auto d = static_cast<Eigen::Index>(state.range(0));
    Matrix xi = Matrix::Zero(d, d);
    const Vector s = random_rows(1, d).row(0).transpose();
    for (auto _ : state) {
        if constexpr (Parallel) {
            aimreg::kernels::forgetting_outer_update(xi, 0.99, s, 1e6);
        } else {
            aimreg::kernels::reference::forgetting_outer_update(xi, 0.99, s, 1e6);
        }
        benchmark::DoNotOptimize(xi.data());
    }
}

}  // namespace

BENCHMARK(BM_WeightedGram<true>)->Arg(6)->Arg(62)->Arg(314);
BENCHMARK(BM_WeightedGram<false>)->Arg(6)->Arg(62)->Arg(314);
BENCHMARK(BM_WeightedCross<true>)->Arg(6)->Arg(62)->Arg(314);
BENCHMARK(BM_WeightedCross<false>)->Arg(6)->Arg(62)->Arg(314);
BENCHMARK(BM_ForgettingUpdate<true>)->Arg(6)->Arg(62)->Arg(314);
BENCHMARK(BM_ForgettingUpdate<false>)->Arg(6)->Arg(62)->Arg(314);

BENCHMARK_MAIN();
