#include <benchmark/benchmark.h>

#include "lforge/basins.hpp"
#include "lforge/bbob.hpp"
#include "lforge/expr.hpp"
#include "lforge/features.hpp"
#include "lforge/rng.hpp"
#include "lforge/sampling.hpp"
#include "lforge/stats.hpp"

using namespace lforge;

namespace {

ObjectiveFunction bench_function()
{
    return make_expr_function(parse("sin(3*x1) * cos(2*x2) + 0.1*(x1^2 + x2^2)", 2), Domain::box(2, -5, 5));
}

void BM_EvalExpr(benchmark::State& state)
{
    auto const tree = parse("sin(3*x1) * cos(2*x2) + 0.1*(x1^2 + x2^2) - log(abs(x1*x2) + 1)", 2);
    std::vector<double> x{0.3, -1.7};
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval_expr(tree, x));
        x[0] += 1e-9;
    }
}
BENCHMARK(BM_EvalExpr);

void BM_ComputeFeatures(benchmark::State& state)
{
    auto const dim = static_cast<std::size_t>(state.range(0));
    auto const p = bbob::instantiate(15, 1, dim);
    Points const x = latin_hypercube(250 * dim, p.function.domain(), 1);
    auto const y = normalize_objective(evaluate_batch(p.function, x)).values;
    for (auto _ : state) {
        benchmark::DoNotOptimize(compute_features(x, y, 1));
    }
}
BENCHMARK(BM_ComputeFeatures)->Arg(2)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_AssignBasins(benchmark::State& state)
{
    auto const f = bench_function();
    auto const r = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(assign_basins(f, r));
    }
}
BENCHMARK(BM_AssignBasins)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_Tsne(benchmark::State& state)
{
    Rng rng(3);
    auto const n = state.range(0);
    Eigen::MatrixXd data(n, 20);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < 20; ++j) {
            data(i, j) = rng.normal() + (j == i % 4 ? 6.0 : 0.0);
        }
    }
    TsneConfig cfg;
    cfg.iterations = 300;
    for (auto _ : state) {
        benchmark::DoNotOptimize(tsne_embed(data, cfg));
    }
}
BENCHMARK(BM_Tsne)->Arg(120)->Arg(300)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
