#pragma once

// Post-merge processor stack. Order is fixed:
//   repetition penalty -> top-k mask -> softmax(temperature) -> top-p -> select
// Top-k masks scores before the softmax, top-p truncates probabilities after it.

#include "tracemerge/core.hpp"
#include "tracemerge/logits.hpp"
#include "tracemerge/rng.hpp"

#include <span>

namespace tracemerge {

/// Divides positive scores and multiplies non-positive scores by `penalty`
/// for every token present in `history` (duplicates count once).
LogitVector apply_repetition_penalty(const LogitVector &logits, std::span<const TokenId> history, double penalty);

/// Keeps the k largest entries and sets the rest to -inf. Ties at the
/// boundary keep the lower token id.
LogitVector apply_top_k(const LogitVector &logits, std::uint32_t k);

/// Keeps the smallest descending-probability prefix (ties by ascending id)
/// whose mass reaches p, zeroes the rest and renormalizes.
ProbVector apply_top_p(const ProbVector &probs, double p);

/// Greedy: argmax with ties to the lower id. Otherwise one 53-bit uniform u
/// from `rng` and an ascending-id scan for the first id with u * sum < cdf.
TokenId select_token(const ProbVector &probs, const SamplingPolicy &policy, Rng &rng);

struct StepChoice {
    TokenId token = 0;
    /// Probability of `token` under the final processed distribution.
    double probability = 0.0;
};

/// Runs the full processor stack over double-precision scores. `history`
/// feeds the repetition penalty. Greedy mode takes the argmax of the
/// processed scores and draws nothing from `rng`.
StepChoice run_processors(std::span<const double> scores, std::span<const TokenId> history, double temperature,
                          const SamplingPolicy &policy, Rng &rng);

/// One answer step on merged logits: penalty history is the shared answer
/// prefix only, temperature is temp_answer.
StepChoice process_merged(const LogitVector &merged, std::span<const TokenId> answer, const SamplingPolicy &policy,
                          Rng &rng);

/// Prob-merge counterpart: the stack runs on log(p) at temperature 1, since
/// temperature was already applied inside each per-trace softmax and the
/// averaged distribution is not re-tempered.
StepChoice process_merged(const ProbVector &merged, std::span<const TokenId> answer, const SamplingPolicy &policy,
                          Rng &rng);

/// process_merged over the session's shared answer, token only.
TokenId process_step(const LogitVector &merged, const EnsembleSession &session, const SamplingPolicy &policy,
                     Rng &rng);

TokenId process_step(const ProbVector &merged, const EnsembleSession &session, const SamplingPolicy &policy,
                     Rng &rng);

} // namespace tracemerge
