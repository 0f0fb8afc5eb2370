// The engine against transcripts from tests/oracles/reference_decoder.py,
// an independent Python implementation of the same rules.

#include "oracles.hpp"

#include <doctest.h>

using namespace tracemerge;

namespace {

template <typename T>
std::vector<T> as_vector(const Json &j) {
    return j.get<std::vector<T>>();
}

} // namespace

TEST_CASE("engine transcripts match the reference decoder") {
    const Json cases = oracle::read_json(oracle::fixture("reference/cases.json"));
    REQUIRE(cases.size() >= 100);
    std::size_t one_step_checked = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CAPTURE(i);
        const Json &c = cases[i];
        const RunConfig config = oracle::run_config(c["config"]);
        auto backend = make_backend(config);
        const Tokens prompt = as_vector<TokenId>(c["prompt"]);
        const Json &want = c["expected"];

        const DecodeRecord rec = run_pipeline(prompt, config.engine, *backend);
        REQUIRE(rec.valid);
        const auto thinking = want["thinking"];
        REQUIRE(rec.traces.size() == thinking.size());
        for (std::size_t k = 0; k < thinking.size(); ++k) {
            CAPTURE(k);
            const bool trimmed = rec.traces[k].phase == TracePhase::Trimmed;
            if (!trimmed) CHECK(rec.traces[k].generated == as_vector<TokenId>(thinking[k]));
            CHECK(rec.traces[k].forced == want["forced"][k].get<bool>());
            CHECK((rec.traces[k].phase != TracePhase::Thinking) == want["ready"][k].get<bool>());
        }
        CHECK(rec.thinking_steps == want["thinking_steps"].get<std::size_t>());
        CHECK(rec.selected == as_vector<std::size_t>(want["selected"]));
        CHECK(rec.answer == as_vector<TokenId>(want["answer"]));
        CHECK(rec.trace_answers == as_vector<std::string>(want["trace_answers"]));

        if (config.engine.strategy.kind == StrategyKind::DirectMerge && !config.engine.strategy.trim_suffix) {
            EngineConfig one = config.engine;
            one.pipeline = PipelineShape::OneStep;
            const DecodeRecord rec1 = run_pipeline(prompt, one, *backend);
            CHECK(rec1.answer == rec.answer);
            CHECK(rec1.trace_answers == rec.trace_answers);
            ++one_step_checked;
        }
    }
    CHECK(one_step_checked > 10);
}

TEST_CASE("toy hash and generator regression values") {
    const Json r = oracle::read_json(oracle::fixture("reference/regression.json"));
    const ToyHashParams params{r["toy_hash_seed"].get<std::uint64_t>(), r["toy_hash_vocab"].get<std::uint32_t>(),
                               r["toy_hash_m"].get<std::uint32_t>(), 0, 0};
    const Tokens ctx = as_vector<TokenId>(r["toy_hash_context"]);
    const LogitVector z = toy_hash_logits(ctx, params);
    const auto bits = as_vector<std::uint32_t>(r["toy_hash_logits_bits"]);
    REQUIRE(z.size() == bits.size());
    for (std::size_t v = 0; v < bits.size(); ++v) CHECK(std::bit_cast<std::uint32_t>(z.values[v]) == bits[v]);

    CHECK(splitmix64(0) == r["splitmix64_0"].get<std::uint64_t>());
    CHECK(fnv1a64(ctx) == r["fnv1a64_1_2"].get<std::uint64_t>());
    Rng rng(42);
    CHECK(rng.next_u64() == r["rng42_first_u64"].get<std::uint64_t>());
}

TEST_CASE("golden records agree with the reference decoder") {
    const Json ref = oracle::read_json(oracle::fixture("golden/reference_answers.json"));
    const auto records = load_records(oracle::fixture("golden/expected.jsonl"));
    REQUIRE(records.size() == ref.size());
    for (const auto &rec : records) {
        CAPTURE(rec.id);
        const Json &want = ref.at(rec.id);
        CHECK(rec.selected == as_vector<std::size_t>(want["selected"]));
        CHECK(rec.answer == as_vector<TokenId>(want["answer"]));
        CHECK(rec.trace_answers == as_vector<std::string>(want["trace_answers"]));
    }
}
