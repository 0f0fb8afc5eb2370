#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace tracemerge;

namespace {

// vocab: 0 delimiter, 1 word, 2 eos, 3 pad.
const Vocabulary kVocab(4, 2, 3, {0});

LogitScript answer_script() {
    return LogitScript::from_json(Json::parse(R"({
        "vocab_size": 4, "eos_id": 2, "pad_id": 3, "default": [-9, 5, 0, -9],
        "rows": [{"suffix": [1, 0],       "logits": [0, 4, 1, -9]},
                 {"suffix": [1, 1, 0],    "logits": [0, 0, 2, -9]},
                 {"suffix": [1, 0, 1],    "logits": [0, 3, 0, -9]},
                 {"suffix": [1, 1, 0, 1], "logits": [0, -2, 2, -9]}]})"));
}

std::vector<Trace> two_ready_traces() {
    return {Trace({1}, {0}, TracePhase::Finished, 1, kVocab.delimiter()),
            Trace({1}, {1, 0}, TracePhase::Finished, 2, kVocab.delimiter())};
}

EngineConfig greedy_config(std::uint32_t K, std::uint32_t N) {
    EngineConfig c{.vocab = kVocab};
    c.strategy = StrategyConfig{StrategyKind::DirectMerge, false, K, N, 8, 6};
    c.policy.greedy = true;
    c.policy.temp_answer = 1.0;
    return c;
}

// Throws a transport error on the n-th call.
class FailingBackend final : public Backend {
public:
    FailingBackend(Backend &inner, int fail_at) : inner_(inner), fail_at_(fail_at) {}
    const BackendDescriptor &descriptor() const noexcept override { return inner_.descriptor(); }

protected:
    std::vector<LogitVector> compute(std::span<const Tokens> contexts) override {
        if (++calls_ == fail_at_) throw TransportError("injected");
        return inner_.next_logits(contexts);
    }

private:
    Backend &inner_;
    int fail_at_;
    int calls_ = 0;
};

long double prob_of(const std::vector<long double> &scores, std::size_t id) {
    return oracle::softmax(scores, 1.0L)[id];
}

} // namespace

TEST_CASE("greedy shared answer over two contexts, by hand") {
    ToyScriptedBackend backend(answer_script());
    const EngineConfig config = greedy_config(2, 2);
    // step 1: means [0, 2, 1.5, -9] -> 1 (trace 1 alone would stop with eos)
    // step 2: means [0, 0.5, 1, -9] -> eos
    for (bool use_mask : {false, true}) {
        CAPTURE(use_mask);
        const AnswerResult r = decode_answer(two_ready_traces(), config, backend, use_mask);
        CHECK(r.answer == Tokens{1, 2});
        CHECK(r.stop == StopReason::Eos);
        REQUIRE(r.steps.size() == 2);
        CHECK(r.steps[0].probability == doctest::Approx(static_cast<double>(prob_of({0, 2, 1.5, -9}, 1))).epsilon(1e-6));
        CHECK(r.steps[1].probability == doctest::Approx(static_cast<double>(prob_of({0, 0.5, 1, -9}, 2))).epsilon(1e-6));
    }
    const std::vector<Trace> second_only{two_ready_traces()[1]};
    CHECK(decode_answer(second_only, greedy_config(1, 1), backend, false).answer == Tokens{2});
    CHECK(render_tokens(Tokens{1, 2}, kVocab.eos_id()) == "1");
}

TEST_CASE("probability merge averages the per-context distributions") {
    ToyScriptedBackend backend(answer_script());
    EngineConfig config = greedy_config(2, 2);
    config.merge_mode = MergeMode::Probs;
    const AnswerResult r = decode_answer(two_ready_traces(), config, backend, false);
    const auto p0 = oracle::softmax({0, 4, 1, -9}, 1.0L);
    const auto p1 = oracle::softmax({0, 0, 2, -9}, 1.0L);
    std::vector<long double> mean(4);
    for (std::size_t i = 0; i < 4; ++i) mean[i] = (p0[i] + p1[i]) / 2;
    const auto best = static_cast<TokenId>(std::max_element(mean.begin(), mean.end()) - mean.begin());
    REQUIRE(!r.answer.empty());
    CHECK(r.answer[0] == best);
    CHECK(r.steps[0].probability == doctest::Approx(static_cast<double>(mean[best])).epsilon(1e-6));
}

TEST_CASE("answer length cap") {
    ToyScriptedBackend backend(answer_script());
    EngineConfig config = greedy_config(1, 1);
    config.strategy.max_answer_tokens = 3;
    const std::vector<Trace> t{Trace({2}, {0}, TracePhase::Finished, 1, kVocab.delimiter())};
    const AnswerResult r = decode_answer(t, config, backend, false);
    CHECK(r.answer == Tokens{1, 1, 1});
    CHECK(r.stop == StopReason::Length);
}

TEST_CASE("a trace that never emits the delimiter is force-closed") {
    ToyScriptedBackend backend(answer_script());
    EngineConfig config = greedy_config(1, 1);
    config.strategy.max_think_tokens = 5;
    const ThinkingResult t = generate_thinking({2}, config, backend);
    REQUIRE(t.pool.traces().size() == 1);
    CHECK(t.pool.traces()[0].generated() == Tokens{1, 1, 1, 1, 0});
    CHECK(t.forced[0]);
    CHECK(t.steps == 5);

    EngineConfig two = greedy_config(1, 1);
    two.vocab = Vocabulary(4, 2, 3, {0, 1});
    two.strategy.max_think_tokens = 5;
    const ThinkingResult t2 = generate_thinking({2}, two, backend);
    CHECK(t2.pool.traces()[0].generated() == Tokens{1, 1, 1, 0, 1});
    CHECK(t2.forced[0]);

    const DecodeRecord rec = run_pipeline({2}, config, backend);
    CHECK(rec.valid);
    CHECK(rec.traces[0].forced);
    CHECK(rec.traces[0].reasoning_length == 5u);
    CHECK(rec.answer_after_delimiters);
}

TEST_CASE("early ready starts merging at the K-th completion") {
    const RunConfig base = oracle::run_config(Json::parse(R"({
        "vocabulary": {"size": 24, "eos_id": 1, "pad_id": 0, "delimiter": [5]},
        "backend": {"type": "toy-hash", "seed": 3, "vocab": 24, "m": 2},
        "strategy": {"kind": "EarlyReady", "K": 2, "N": 6, "max_think_tokens": 40, "max_answer_tokens": 8},
        "sampling": {"temp_think": 1.0, "temp_answer": 0.7, "seed": 17}})"));
    auto backend = make_backend(base);
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EngineConfig config = base.engine;
        config.policy.seed = seed;
        const DecodeRecord rec = run_pipeline({2, 3}, config, *backend);
        REQUIRE(rec.valid);
        REQUIRE(rec.selected.size() == 2);
        std::vector<std::size_t> done;
        for (const auto &t : rec.traces) {
            if (t.completion_step) done.push_back(*t.completion_step);
        }
        std::sort(done.begin(), done.end());
        REQUIRE(done.size() >= 2);
        REQUIRE(rec.merge_start_step.has_value());
        CHECK(*rec.merge_start_step == done[1]);
        CHECK(rec.thinking_steps == done[1]);
        for (std::size_t k : rec.selected) CHECK(rec.traces[k].completion_step <= done[1]);
        ++checked;
    }
    CHECK(checked == 20);
}

TEST_CASE("backend failures yield an invalid record, not an exception") {
    ToyScriptedBackend inner(answer_script());
    for (int fail_at : {1, 3, 7}) {
        FailingBackend backend(inner, fail_at);
        const DecodeRecord rec = run_pipeline({1}, greedy_config(1, 1), backend);
        CHECK_FALSE(rec.valid);
        CHECK(rec.error.rfind("transport: ", 0) == 0);
    }
}

TEST_CASE("engine config cross-field checks") {
    EngineConfig c = greedy_config(2, 3);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.strategy.kind = StrategyKind::ShortestK;
    CHECK_NOTHROW(c.validate());
    c.pipeline = PipelineShape::OneStep;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("pipeline: one_step requires strategy.kind DirectMerge"),
                         ConfigError);
    c = greedy_config(2, 2);
    c.pipeline = PipelineShape::OneStep;
    c.strategy.trim_suffix = true;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.strategy.trim_suffix = false;
    BackendDescriptor no_mask{4, 2, 3, false, 1024, "x"};
    CHECK_THROWS_AS(c.validate(&no_mask), ConfigError);
    no_mask.supports_mask = true;
    CHECK_NOTHROW(c.validate(&no_mask));
    no_mask.vocab_size = 5;
    CHECK_THROWS_AS(c.validate(&no_mask), ConfigError);
    c = greedy_config(1, 1);
    c.strategy.max_think_tokens = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(merge_mode_from_string("mean"), InvariantError);
    CHECK_THROWS_AS(pipeline_shape_from_string("three_stage"), InvariantError);
}

TEST_CASE("prompts must be non-empty and in vocabulary") {
    ToyScriptedBackend backend(answer_script());
    CHECK_THROWS_AS(run_pipeline({}, greedy_config(1, 1), backend), InvariantError);
    CHECK_THROWS_AS(run_pipeline({9}, greedy_config(1, 1), backend), InvariantError);
}

TEST_CASE("alignment left-pads to the longest context") {
    const PaddedBatch b = align_contexts(two_ready_traces(), kVocab);
    CHECK(b.width() == 3);
    CHECK(b.logical_context(0) == Tokens{1, 0});
    CHECK(b.logical_context(1) == Tokens{1, 1, 0});
    CHECK(b.rows()[0][0] == kVocab.pad_id());
    CHECK_FALSE(b.mask()[0][0]);
    const std::vector<Trace> thinking{Trace({1}, {1})};
    CHECK_THROWS_AS(align_contexts(thinking, kVocab), InvariantError);
}

TEST_CASE("single-context ensemble equals plain decoding") {
    const RunConfig base = oracle::run_config(Json::parse(R"({
        "vocabulary": {"size": 16, "eos_id": 1, "pad_id": 0, "delimiter": [4, 5]},
        "backend": {"type": "toy-hash", "seed": 8, "vocab": 16, "m": 3, "force_after": 9},
        "strategy": {"kind": "DirectMerge", "K": 1, "N": 1, "max_think_tokens": 16, "max_answer_tokens": 6},
        "sampling": {"temp_think": 0.9, "temp_answer": 0.8, "top_k": 6, "top_p": 0.9,
                     "repetition_penalty": 1.2}})"));
    auto backend = make_backend(base);
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        EngineConfig config = base.engine;
        config.policy.seed = seed;
        const DecodeRecord rec = run_pipeline({3, 7}, config, *backend);
        const PlainResult plain = decode_plain({3, 7}, 0, config, *backend);
        CHECK(rec.answer == plain.answer);
        CHECK(rec.traces[0].generated == plain.trace.generated());
        CHECK(rec.traces[0].forced == plain.forced);
    }
}
