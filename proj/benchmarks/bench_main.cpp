#include <tracemerge/logits.hpp>
#include <tracemerge/pipeline.hpp>
#include <tracemerge/sampling.hpp>
#include <tracemerge/scheduler.hpp>
#include <tracemerge/toy_backends.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace tracemerge;

namespace {

std::vector<LogitVector> random_rows(std::size_t K, std::size_t V) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<float> d(-10.0f, 10.0f);
    std::vector<LogitVector> rows(K, LogitVector{std::vector<float>(V)});
    for (auto &r : rows) {
        for (auto &x : r.values) x = d(gen);
    }
    return rows;
}

void BM_MergeLogits(benchmark::State &state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(merge_logits(rows));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_MergeLogits)->Args({2, 32000})->Args({4, 32000})->Args({8, 32000})->Args({8, 152000});

void BM_MergeProbs(benchmark::State &state) {
    const auto rows = random_rows(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(merge_probs(rows, 0.6));
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}
BENCHMARK(BM_MergeProbs)->Args({4, 32000})->Args({8, 32000});

void BM_ProcessorStack(benchmark::State &state) {
    const auto merged = random_rows(1, static_cast<std::size_t>(state.range(0))).front();
    SamplingPolicy policy;
    policy.top_k = 50;
    policy.top_p = 0.95;
    policy.repetition_penalty = 1.1;
    const Tokens history{1, 2, 3, 4, 5, 6, 7, 8};
    Rng rng(7);
    for (auto _ : state) benchmark::DoNotOptimize(process_merged(merged, history, policy, rng));
}
BENCHMARK(BM_ProcessorStack)->Arg(32000)->Arg(152000);

void BM_ToyHash(benchmark::State &state) {
    const ToyHashParams params{3, static_cast<std::uint32_t>(state.range(0)), 4, 0, 5};
    const Tokens context{9, 8, 7, 6, 5, 4};
    for (auto _ : state) benchmark::DoNotOptimize(toy_hash_logits(context, params));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyHash)->Arg(64)->Arg(32000);

void BM_TrimSuffix(benchmark::State &state) {
    Tokens body;
    for (int i = 0; i < 200; ++i) body.push_back(static_cast<TokenId>(i % 37));
    for (int r = 0; r < 40; ++r) {
        for (TokenId t : {3u, 1u, 4u, 1u, 5u}) body.push_back(t);
    }
    for (auto _ : state) benchmark::DoNotOptimize(trim_repeated_suffix(body));
}
BENCHMARK(BM_TrimSuffix);

void BM_Pipeline(benchmark::State &state) {
    const auto K = static_cast<std::uint32_t>(state.range(0));
    const auto shape = state.range(1) ? PipelineShape::OneStep : PipelineShape::TwoStage;
    EngineConfig config{.vocab = Vocabulary(256, 1, 0, {7})};
    config.strategy = StrategyConfig{StrategyKind::DirectMerge, false, K, K, 64, 32};
    config.pipeline = shape;
    ToyHashBackend backend({11, 256, 3, 40, 7}, 1, 0);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        config.policy.seed = seed++;
        benchmark::DoNotOptimize(run_pipeline({2, 3, 4}, config, backend));
    }
}
BENCHMARK(BM_Pipeline)->Args({1, 0})->Args({4, 0})->Args({4, 1})->Args({8, 0});

} // namespace

BENCHMARK_MAIN();
