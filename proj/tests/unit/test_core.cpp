#include "oracles.hpp"

#include <doctest.h>

using namespace tracemerge;

TEST_CASE("vocabulary invariants") {
    CHECK_NOTHROW(Vocabulary(8, 1, 0, {5, 6}));
    CHECK_THROWS_AS(Vocabulary(0, 0, 0, {0}), InvariantError);
    CHECK_THROWS_AS(Vocabulary(8, 8, 0, {5}), InvariantError);
    CHECK_THROWS_AS(Vocabulary(8, 1, 1, {5}), InvariantError);
    CHECK_THROWS_AS(Vocabulary(8, 1, 0, {}), InvariantError);
    CHECK_THROWS_AS(Vocabulary(8, 1, 0, {5, 0}), InvariantError);
    CHECK_THROWS_AS(Vocabulary(8, 1, 0, {9}), InvariantError);
}

TEST_CASE("trace phases and reasoning length") {
    const Tokens delim{7, 8};
    Trace thinking({1}, {2, 3});
    CHECK_FALSE(thinking.is_ready());
    CHECK_THROWS_AS(thinking.reasoning_length(), InvariantError);

    Trace done({1}, {2, 7, 8, 9}, TracePhase::Finished, 3, delim);
    CHECK(done.is_ready());
    CHECK(done.reasoning_length() == 3);
    CHECK(done.reasoning_context() == Tokens{1, 2, 7, 8});

    CHECK_THROWS_AS(Trace({1}, {2, 7, 8}, TracePhase::Finished, std::nullopt, delim), InvariantError);
    CHECK_THROWS_AS(Trace({1}, {2, 7, 8}, TracePhase::Thinking, 3, delim), InvariantError);
    CHECK_THROWS_AS(Trace({1}, {2, 7, 8}, TracePhase::Finished, 2, delim), InvariantError);
    CHECK_THROWS_AS(Trace({1}, {2, 7, 8}, TracePhase::Finished, 4, delim), InvariantError);
}

TEST_CASE("ensemble session grows one token per step") {
    const Tokens delim{7};
    std::vector<Trace> traces{Trace({1}, {7}, TracePhase::Finished, 1, delim),
                              Trace({2}, {3, 7, 4}, TracePhase::Finished, 2, delim)};
    EnsembleSession s(traces);
    CHECK(s.step() == 0);
    s.append(5);
    s.append(6);
    CHECK(s.step() == 2);
    CHECK(s.context(0) == Tokens{1, 7, 5, 6});
    CHECK(s.context(1) == Tokens{2, 3, 7, 5, 6});

    CHECK_THROWS_AS(EnsembleSession({}), InvariantError);
    CHECK_THROWS_AS(EnsembleSession({Trace({1}, {2})}), InvariantError);
}

TEST_CASE("sampling policy and strategy validation") {
    SamplingPolicy p;
    CHECK_NOTHROW(p.validate());
    p.temp_answer = 0;
    CHECK_THROWS_AS(p.validate(), InvariantError);
    p = {};
    p.top_p = 1.5;
    CHECK_THROWS_AS(p.validate(), InvariantError);
    p = {};
    p.top_k = 0;
    CHECK_THROWS_AS(p.validate(), InvariantError);
    p = {};
    p.repetition_penalty = 0.9;
    CHECK_THROWS_AS(p.validate(), InvariantError);

    StrategyConfig s;
    CHECK_NOTHROW(s.validate());
    s.K = 0;
    CHECK_THROWS_AS(s.validate(), InvariantError);
    s = {StrategyKind::DirectMerge, false, 2, 3};
    CHECK_THROWS_AS(s.validate(), InvariantError);
    s = {StrategyKind::ShortestK, false, 3, 2};
    CHECK_THROWS_AS(s.validate(), InvariantError);
    s = {StrategyKind::ShortestK, false, 2, 4};
    CHECK_NOTHROW(s.validate());
    s.max_answer_tokens = 0;
    CHECK_THROWS_AS(s.validate(), InvariantError);
}

TEST_CASE("stop rule: eos or length, whichever first") {
    const StopRule rule{9, 3};
    CHECK(rule.check(Tokens{}) == StopReason::None);
    CHECK(rule.check(Tokens{1, 9}) == StopReason::Eos);
    CHECK(rule.check(Tokens{1, 2, 3}) == StopReason::Length);
    CHECK(rule.check(Tokens{1, 2, 9}) == StopReason::Eos);
}
