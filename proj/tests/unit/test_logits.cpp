#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace tracemerge;

namespace {

LogitVector lv(std::vector<float> v) { return LogitVector{std::move(v)}; }

std::size_t argmax(const std::vector<long double> &v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

} // namespace

TEST_CASE("merge_logits examples") {
    const std::vector<LogitVector> one{lv({0.5f, -2.f, 3.f})};
    CHECK(merge_logits(one).values == one[0].values);

    const std::vector<LogitVector> sym{lv({1, 3}), lv({3, 1})};
    CHECK(merge_logits(sym).values == std::vector<float>{2, 2});

    const std::vector<LogitVector> witness{lv({20, 0}), lv({0, 6}), lv({0, 6})};
    const auto m = merge_logits(witness);
    CHECK(m.values[0] == static_cast<float>(20.0 / 3.0));
    CHECK(m.values[1] == 4.0f);
}

TEST_CASE("merge rejects malformed input") {
    CHECK_THROWS_AS(merge_logits({}), InvariantError);
    const std::vector<LogitVector> ragged{lv({1, 2}), lv({1})};
    CHECK_THROWS_AS(merge_logits(ragged), InvariantError);
    CHECK_THROWS_AS(merge_probs(ragged, 1.0), InvariantError);
    const std::vector<LogitVector> nan{lv({1, std::nanf("")})};
    CHECK_THROWS_AS(merge_logits(nan), InvariantError);
    const std::vector<LogitVector> inf{lv({1, INFINITY})};
    CHECK_THROWS_AS(merge_probs(inf, 1.0), InvariantError);
    const std::vector<LogitVector> ok{lv({1, 2})};
    CHECK_THROWS_AS(merge_probs(ok, 0.0), InvariantError);
}

TEST_CASE("merge_probs examples and the divergence witness") {
    const std::vector<LogitVector> one{lv({0.3f, 1.2f, -0.4f})};
    const auto p1 = merge_probs(one, 0.7);
    const auto s1 = softmax(one[0], 0.7);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p1.values[i] == doctest::Approx(s1.values[i]).epsilon(1e-15));

    const std::vector<LogitVector> twin{lv({0.3f, 1.2f}), lv({0.3f, 1.2f})};
    const auto p2 = merge_probs(twin, 1.0);
    const auto s2 = softmax(twin[0], 1.0);
    CHECK(p2.values[0] == doctest::Approx(s2.values[0]).epsilon(1e-15));

    const std::vector<LogitVector> witness{lv({20, 0}), lv({0, 6}), lv({0, 6})};
    const auto pm = merge_probs(witness, 1.0);
    CHECK(pm.values[0] == doctest::Approx(0.335).epsilon(0.002));
    CHECK(pm.values[1] == doctest::Approx(0.665).epsilon(0.002));

    // Brute-force oracle for both argmaxes.
    std::vector<long double> mean_logits(2, 0), mean_probs(2, 0);
    for (const auto &v : witness) {
        const auto p = oracle::softmax({v.values[0], v.values[1]}, 1);
        for (std::size_t i = 0; i < 2; ++i) {
            mean_logits[i] += v.values[i] / 3.0L;
            mean_probs[i] += p[i] / 3.0L;
        }
    }
    CHECK(argmax(oracle::softmax(mean_logits, 1)) == 0);
    CHECK(argmax(mean_probs) == 1);
    CHECK(pm.values[1] > pm.values[0]);
    CHECK(merge_logits(witness).values[0] > merge_logits(witness).values[1]);
}

TEST_CASE("softmax examples") {
    const auto u = softmax(lv({0, 0}), 1.0);
    CHECK(u.values[0] == doctest::Approx(0.5));
    const auto a = softmax(std::vector<double>{std::log(2.0), 0.0}, 1.0);
    CHECK(a.values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(a.values[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto shifted = softmax(std::vector<double>{1000.5, 1000.0}, 1.0);
    const auto base = softmax(std::vector<double>{0.5, 0.0}, 1.0);
    CHECK(shifted.values[0] == doctest::Approx(base.values[0]).epsilon(1e-12));
    CHECK_THROWS_AS(softmax(lv({0, 0}), 0.0), InvariantError);
    CHECK_THROWS_AS(softmax(lv({0, 0}), -1.0), InvariantError);
    const auto masked = softmax(std::vector<double>{-INFINITY, 0.0}, 1.0);
    CHECK(masked.values[0] == 0.0);
    CHECK(masked.values[1] == 1.0);
    CHECK_NOTHROW(require_distribution(masked));
    CHECK_THROWS_AS(require_distribution(ProbVector{{0.5, 0.4}}), InvariantError);
}

TEST_CASE("corrupted reduction order is order dependent") {
    const std::vector<LogitVector> a{lv({0}), lv({0}), lv({6})};
    const std::vector<LogitVector> b{lv({6}), lv({0}), lv({0})};
    debug::set_corrupt_reduction_order(true);
    const float fa = merge_logits(a).values[0], fb = merge_logits(b).values[0];
    debug::set_corrupt_reduction_order(false);
    CHECK(fa != fb);
    CHECK(merge_logits(a).values == merge_logits(b).values);
}
