#include <benchmark/benchmark.h>

#include <random>

#include "ampal/acquisition.hpp"
#include "ampal/amp_model.hpp"
#include "ampal/amp_oracle.hpp"
#include "ampal/rng.hpp"
#include "ampal/training.hpp"

using namespace ampal;

namespace {

ModelConfig bench_config(int channels, int layers_per_stack, int stacks) {
    ModelConfig cfg;
    cfg.channels = channels;
    cfg.kernel_width = 3;
    cfg.dilation_schedule = ModelConfig::stacked_dilations(layers_per_stack, stacks);
    return cfg;
}

AudioSignal noise(int64_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    AudioSignal s;
    s.sample_rate = 8000;
    s.samples.resize(static_cast<size_t>(n));
    for (auto& v : s.samples) v = 2 * uniform01(rng) - 1;
    return s;
}

KnobVector mid() { return KnobVector{std::vector<real>(6, 0.5)}; }

void bm_forward(benchmark::State& state) {
    auto cfg = bench_config(static_cast<int>(state.range(0)), 7, 1);
    auto params = init_model(cfg, 1);
    auto x = noise(8000, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward(params, x, mid()));
    }
    state.SetItemsProcessed(state.iterations() * x.length());
}
BENCHMARK(bm_forward)->Arg(4)->Arg(8)->Arg(16);

void bm_disagreement_at(benchmark::State& state) {
    auto cfg = bench_config(4, 7, 1);
    Ensemble e;
    for (int i = 0; i < 4; ++i) e.models.push_back(init_model(cfg, 10 + i));
    auto x = noise(state.range(0), 3);
    auto g = mid();
    for (auto _ : state) {
        benchmark::DoNotOptimize(disagreement_at(e, x, g));
    }
}
BENCHMARK(bm_disagreement_at)->Arg(2048)->Arg(8192);

void bm_train_epoch(benchmark::State& state) {
    auto cfg = bench_config(4, 6, 1);
    OracleConfig oracle;
    LabeledDataset ds;
    ds.x = noise(8000, 4);
    label(ds, mid(), oracle);
    TrainConfig tc;
    tc.epochs = 1;
    tc.chunk_length = 2048;
    auto init = init_model(cfg, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_model(init, ds, tc));
    }
}
BENCHMARK(bm_train_epoch);

void bm_simulate_amp(benchmark::State& state) {
    OracleConfig oracle;
    auto x = noise(state.range(0), 6);
    auto g = mid();
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate_amp(x, g, oracle));
    }
    state.SetItemsProcessed(state.iterations() * x.length());
}
BENCHMARK(bm_simulate_amp)->Arg(80000);

}  // namespace

BENCHMARK_MAIN();
