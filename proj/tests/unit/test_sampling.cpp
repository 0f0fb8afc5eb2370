#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace tracemerge;

namespace {

LogitVector lv(std::vector<float> v) { return LogitVector{std::move(v)}; }

} // namespace

TEST_CASE("repetition penalty") {
    const auto z = lv({2, -1});
    CHECK(apply_repetition_penalty(z, Tokens{0}, 1.0).values == z.values);
    CHECK(apply_repetition_penalty(z, Tokens{0}, 1.25).values == std::vector<float>{1.6f, -1});
    CHECK(apply_repetition_penalty(z, Tokens{1}, 1.25).values == std::vector<float>{2, -1.25f});
    // History is a set: repeats penalize once.
    CHECK(apply_repetition_penalty(z, Tokens{0, 0, 0}, 1.25).values == std::vector<float>{1.6f, -1});
    CHECK_THROWS_AS(apply_repetition_penalty(z, Tokens{0}, 0.99), InvariantError);
    CHECK_THROWS_AS(apply_repetition_penalty(z, Tokens{5}, 1.5), InvariantError);
}

TEST_CASE("top-k") {
    const auto z = lv({1, 3, 3, 0});
    const auto k2 = apply_top_k(z, 2);
    CHECK(std::isinf(k2.values[0]));
    CHECK(k2.values[1] == 3);
    CHECK(k2.values[2] == 3);
    CHECK(std::isinf(k2.values[3]));
    const auto k1 = apply_top_k(z, 1);
    CHECK(k1.values[1] == 3);
    CHECK(std::isinf(k1.values[2]));
    CHECK(apply_top_k(z, 4).values == z.values);
    CHECK(apply_top_k(z, 9).values == z.values);
    CHECK_THROWS_AS(apply_top_k(z, 0), InvariantError);
}

TEST_CASE("top-p") {
    const ProbVector p{{0.5, 0.3, 0.2}};
    CHECK(apply_top_p(p, 1.0).values == p.values);
    const auto a = apply_top_p(p, 0.7);
    CHECK(a.values[0] == doctest::Approx(0.625));
    CHECK(a.values[1] == doctest::Approx(0.375));
    CHECK(a.values[2] == 0.0);
    const auto b = apply_top_p(p, 0.5);
    CHECK(b.values == std::vector<double>{1, 0, 0});
    CHECK_THROWS_AS(apply_top_p(p, 0.0), InvariantError);
    CHECK_THROWS_AS(apply_top_p(p, 1.01), InvariantError);
    // Equal probabilities: the lower id comes first.
    const auto tie = apply_top_p(ProbVector{{0.25, 0.25, 0.25, 0.25}}, 0.5);
    CHECK(tie.values == std::vector<double>{0.5, 0.5, 0, 0});
}

TEST_CASE("select_token") {
    SamplingPolicy greedy;
    greedy.greedy = true;
    SamplingPolicy sample;
    Rng rng(1);
    CHECK(select_token(ProbVector{{0, 0, 1}}, sample, rng) == 2);
    CHECK(select_token(ProbVector{{0, 0, 1}}, greedy, rng) == 2);
    CHECK(select_token(ProbVector{{0.1, 0.7, 0.2}}, greedy, rng) == 1);
    CHECK(select_token(ProbVector{{0.4, 0.4, 0.2}}, greedy, rng) == 0);
    CHECK_THROWS_AS(select_token(ProbVector{{0, 0}}, sample, rng), InvariantError);

    // Frozen regression value from tests/oracles/reference_decoder.py.
    const Json reg = oracle::read_json(oracle::fixture("reference/regression.json"));
    Rng seeded(42);
    CHECK(select_token(ProbVector{{0.25, 0.25, 0.25, 0.25}}, sample, seeded) ==
          reg["rng42_uniform_select_4"].get<TokenId>());

    // Greedy draws nothing from the generator.
    Rng untouched(9), reference(9);
    select_token(ProbVector{{0.3, 0.7}}, greedy, untouched);
    CHECK(untouched == reference);
}

TEST_CASE("inverse-CDF draw scans ids ascending") {
    // u in [0, 0.2) -> 0, [0.2, 0.7) -> 1, [0.7, 1) -> 2.
    const ProbVector p{{0.2, 0.5, 0.3}};
    SamplingPolicy sample;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng probe(seed), rng(seed);
        const double u = probe.uniform();
        const TokenId want = u < 0.2 ? 0 : u < 0.7 ? 1 : 2;
        CHECK(select_token(p, sample, rng) == want);
    }
}

TEST_CASE("greedy is invariant under temperature") {
    SamplingPolicy pol;
    pol.greedy = true;
    const std::vector<double> scores{0.3, 2.5, 2.4, -1};
    for (double t : {0.05, 0.6, 1.0, 7.0}) {
        Rng rng(0);
        CHECK(run_processors(scores, {}, t, pol, rng).token == 1);
    }
}

TEST_CASE("3-token scripted step sequence equals a hand simulation") {
    // vocab {0, 1, 2}, eos 2. Two finished traces with contexts [1,0] and
    // [1,1,0]; the script keys rows on context suffixes.
    const Tokens delim{0};
    std::vector<Trace> traces{Trace({1}, {0}, TracePhase::Finished, 1, delim),
                              Trace({1}, {1, 0}, TracePhase::Finished, 2, delim)};
    LogitScript script;
    script.vocab_size = 3;
    script.eos_id = 2;
    script.pad_id = 1;
    script.default_row = {0, 0, 5};
    script.rows = {{{1, 0}, {1, 2, 0}},          // trace 0, step 0
                   {{1, 1, 0}, {3, 0, 0}},       // trace 1, step 0
                   {{1, 0, 0}, {2.5f, 1, 0}},    // trace 0, step 1
                   {{1, 1, 0, 0}, {2, 3, 1}}};   // trace 1, step 1
    ToyScriptedBackend backend(script);

    SamplingPolicy pol;
    pol.greedy = true;
    pol.repetition_penalty = 1.25;
    EnsembleSession session(traces);
    Rng rng(0);

    // Step 0: mean [2, 1, 0] -> 0.
    // Step 1: mean [2.25, 2, 0.5]; 0 is in the answer so 2.25 / 1.25 = 1.8 < 2 -> 1.
    // Step 2: both contexts fall to the default row [0, 0, 5] -> 2 (eos).
    const Tokens hand{0, 1, 2};
    for (TokenId expected : hand) {
        std::vector<Tokens> ctx{session.context(0), session.context(1)};
        const auto rows = backend.next_logits(ctx);
        const TokenId got = process_step(merge_logits(rows), session, pol, rng);
        CHECK(got == expected);
        session.append(got);
    }
    CHECK(session.answer() == hand);

    // Without the penalty step 1 would pick 0.
    pol.repetition_penalty = 1.0;
    EnsembleSession s2(traces, {0});
    std::vector<Tokens> ctx{s2.context(0), s2.context(1)};
    CHECK(process_step(merge_logits(backend.next_logits(ctx)), s2, pol, rng) == 0);
}
