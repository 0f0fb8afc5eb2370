#include "tracemerge/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tracemerge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void penalize(std::span<double> scores, std::span<const TokenId> history, double penalty) {
    if (!(penalty >= 1.0)) throw InvariantError("repetition penalty must be >= 1");
    if (penalty == 1.0) return;
    std::vector<bool> seen(scores.size(), false);
    for (TokenId t : history) {
        if (t >= scores.size()) throw InvariantError("history token " + std::to_string(t) + " out of range");
        if (seen[t]) continue;
        seen[t] = true;
        scores[t] = scores[t] > 0 ? scores[t] / penalty : scores[t] * penalty;
    }
}

// Ids ranked by (score desc, id asc).
std::vector<std::uint32_t> ranked_ids(std::span<const double> scores, std::size_t keep) {
    std::vector<std::uint32_t> ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0u);
    auto before = [&](std::uint32_t a, std::uint32_t b) {
        return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
    };
    if (keep < ids.size()) {
        std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(), before);
        ids.resize(keep);
    } else {
        std::sort(ids.begin(), ids.end(), before);
    }
    return ids;
}

void mask_top_k(std::vector<double> &scores, std::uint32_t k) {
    if (k == 0) throw InvariantError("top_k must be >= 1");
    if (k >= scores.size()) return;
    std::vector<double> masked(scores.size(), kNegInf);
    for (auto id : ranked_ids(scores, k)) masked[id] = scores[id];
    scores = std::move(masked);
}

std::uint32_t argmax(std::span<const double> values) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

} // namespace

LogitVector apply_repetition_penalty(const LogitVector &logits, std::span<const TokenId> history, double penalty) {
    std::vector<double> scores(logits.values.begin(), logits.values.end());
    penalize(scores, history, penalty);
    LogitVector out;
    out.values.assign(scores.begin(), scores.end());
    return out;
}

LogitVector apply_top_k(const LogitVector &logits, std::uint32_t k) {
    std::vector<double> scores(logits.values.begin(), logits.values.end());
    mask_top_k(scores, k);
    LogitVector out;
    out.values.assign(scores.begin(), scores.end());
    return out;
}

ProbVector apply_top_p(const ProbVector &probs, double p) {
    if (!(p > 0.0 && p <= 1.0)) throw InvariantError("top_p must lie in (0, 1]");
    if (p == 1.0) return probs;
    const auto order = ranked_ids(probs.values, probs.size());
    std::size_t keep = 0;
    double mass = 0.0;
    while (keep < order.size()) {
        mass += probs.values[order[keep]];
        ++keep;
        if (mass >= p) break;
    }
    ProbVector out{std::vector<double>(probs.size(), 0.0)};
    for (std::size_t i = 0; i < keep; ++i) out.values[order[i]] = probs.values[order[i]] / mass;
    return out;
}

TokenId select_token(const ProbVector &probs, const SamplingPolicy &policy, Rng &rng) {
    double total = 0.0;
    for (double x : probs.values) {
        if (!(x >= 0.0)) throw InvariantError("negative or NaN probability");
        total += x;
    }
    if (!(total > 0.0)) throw InvariantError("cannot select from an all-zero distribution");
    if (policy.greedy) return argmax(probs.values);

    const double target = rng.uniform() * total;
    double cdf = 0.0;
    TokenId last_nonzero = 0;
    for (TokenId i = 0; i < probs.size(); ++i) {
        if (probs.values[i] == 0.0) continue;
        last_nonzero = i;
        cdf += probs.values[i];
        if (target < cdf) return i;
    }
    return last_nonzero;
}

StepChoice run_processors(std::span<const double> scores_in, std::span<const TokenId> history, double temperature,
                          const SamplingPolicy &policy, Rng &rng) {
    std::vector<double> scores(scores_in.begin(), scores_in.end());
    penalize(scores, history, policy.repetition_penalty);
    if (policy.top_k) mask_top_k(scores, *policy.top_k);
    ProbVector probs = softmax(scores, temperature);
    if (policy.top_p) probs = apply_top_p(probs, *policy.top_p);

    // Softmax is monotone and top-p always keeps the argmax, so the greedy
    // pick is read off the scores; this keeps it exact at any temperature.
    const TokenId token = policy.greedy ? argmax(scores) : select_token(probs, policy, rng);
    return StepChoice{token, probs.values[token]};
}

StepChoice process_merged(const LogitVector &merged, std::span<const TokenId> answer, const SamplingPolicy &policy,
                          Rng &rng) {
    std::vector<double> scores(merged.values.begin(), merged.values.end());
    return run_processors(scores, answer, policy.temp_answer, policy, rng);
}

StepChoice process_merged(const ProbVector &merged, std::span<const TokenId> answer, const SamplingPolicy &policy,
                          Rng &rng) {
    std::vector<double> scores(merged.size());
    std::transform(merged.values.begin(), merged.values.end(), scores.begin(),
                   [](double p) { return p > 0.0 ? std::log(p) : kNegInf; });
    return run_processors(scores, answer, 1.0, policy, rng);
}

TokenId process_step(const LogitVector &merged, const EnsembleSession &session, const SamplingPolicy &policy,
                     Rng &rng) {
    return process_merged(merged, session.answer(), policy, rng).token;
}

TokenId process_step(const ProbVector &merged, const EnsembleSession &session, const SamplingPolicy &policy,
                     Rng &rng) {
    return process_merged(merged, session.answer(), policy, rng).token;
}

} // namespace tracemerge
