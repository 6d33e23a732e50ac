#include <benchmark/benchmark.h>

#include <numeric>

#include "tsmix/clustering.hpp"
#include "tsmix/embedding.hpp"
#include "tsmix/random.hpp"
#include "tsmix/tpe.hpp"
#include "tsmix/trainer.hpp"

using namespace tsmix;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (auto& v : m.data) v = standard_normal(rng);
    return m;
}

std::vector<TrialRecord> history(std::size_t n, std::size_t k) {
    Rng rng(3);
    std::vector<TrialRecord> h;
    for (std::size_t i = 0; i < n; ++i) {
        TrialRecord t;
        t.id = i;
        t.weights = random_suggest(k, rng);
        t.objective = std::accumulate(t.weights.w.begin(), t.weights.w.end(), 0.0);
        t.state = TrialState::complete;
        h.push_back(std::move(t));
    }
    return h;
}

}  // namespace

static void BM_KMeansFit(benchmark::State& state) {
    const auto points = gaussian(static_cast<std::size_t>(state.range(0)), 28, 1);
    KMeansOptions o;
    o.k = 36;
    o.n_init = 1;
    for (auto _ : state) benchmark::DoNotOptimize(kmeans_fit(points, o));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KMeansFit)->Arg(2000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_Assign(benchmark::State& state) {
    const auto points = gaussian(10000, 28, 2);
    const auto centroids = gaussian(36, 28, 3);
    for (auto _ : state) benchmark::DoNotOptimize(assign(points, centroids));
    state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_Assign)->Unit(benchmark::kMillisecond);

static void BM_TpeSuggest(benchmark::State& state) {
    const auto h = history(static_cast<std::size_t>(state.range(0)), 36);
    Rng rng(4);
    for (auto _ : state) benchmark::DoNotOptimize(tpe_suggest(h, 36, TpeOptions{}, rng));
}
BENCHMARK(BM_TpeSuggest)->Arg(20)->Arg(100)->Unit(benchmark::kMicrosecond);

static void BM_TrainRidge(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    TrainingData data;
    data.features = gaussian(n, 28, 5);
    data.windows.length = 1;
    data.windows.inputs = Matrix(n, 1);
    data.windows.targets = gaussian(n, 4, 6);
    for (std::size_t i = 0; i < n; ++i) data.windows.windows.push_back({i, 0, Split::train, 0});
    std::vector<std::size_t> mix(n);
    std::iota(mix.begin(), mix.end(), std::size_t{0});
    for (auto _ : state) benchmark::DoNotOptimize(train_ridge(mix, data, 1e-3));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainRidge)->Arg(1000)->Arg(12000)->Unit(benchmark::kMillisecond);

static void BM_Featurize(benchmark::State& state) {
    Rng rng(7);
    std::vector<double> window(300 * 4);
    for (auto& v : window) v = standard_normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(featurize_statistical(window, 4));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Featurize);
BENCHMARK_MAIN();
