#pragma once

#include "tracemerge/core.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace tracemerge {

inline constexpr std::size_t kDefaultTrimMinBlock = 2;
inline constexpr std::size_t kDefaultTrimMaxBlock = 64;

/// End index of the first occurrence of the vocabulary delimiter in the
/// trace's generated tokens.
std::optional<std::size_t> detect_delimiter(const Trace &trace, const Vocabulary &vocab);
std::optional<std::size_t> detect_delimiter(std::span<const TokenId> generated, std::span<const TokenId> delimiter);

/// Collapses a run of repeated blocks at the end of `reasoning` to a single
/// copy. Every block length b in [b_min, b_max] with at least two trailing
/// copies is a candidate; the candidate removing the most tokens wins, ties
/// going to the larger b.
Tokens trim_repeated_suffix(std::span<const TokenId> reasoning, std::size_t b_min = kDefaultTrimMinBlock,
                            std::size_t b_max = kDefaultTrimMaxBlock);

/// Trims the reasoning of a ready trace (delimiter excluded, then reattached).
/// Returns the trace unchanged when nothing repeats, otherwise a Trimmed trace.
Trace trim_trace(const Trace &trace, const Vocabulary &vocab, std::size_t b_min = kDefaultTrimMinBlock,
                 std::size_t b_max = kDefaultTrimMaxBlock);

struct CompletionEvent {
    /// Thinking step (1-based token count) at which the delimiter landed.
    std::size_t step = 0;
    std::size_t trace = 0;

    friend bool operator==(const CompletionEvent &, const CompletionEvent &) = default;
};

/// N traces plus the append-only log of delimiter completions. The log is
/// the authoritative completion order for Early-Ready.
class TracePool {
public:
    explicit TracePool(std::vector<Trace> traces = {});

    const std::vector<Trace> &traces() const noexcept { return traces_; }
    const std::vector<CompletionEvent> &completions() const noexcept { return completions_; }
    std::size_t size() const noexcept { return traces_.size(); }

    /// Indices of ready traces, ascending.
    std::vector<std::size_t> ready() const;
    std::size_t ready_count() const noexcept { return completions_.size(); }

    /// Replaces trace `index` with its ready form and logs the completion.
    /// Events must arrive in non-decreasing step order.
    void complete(std::size_t index, Trace finished, std::size_t step);

    /// Updates a trace that is still thinking.
    void update(std::size_t index, Trace thinking);

private:
    std::vector<Trace> traces_;
    std::vector<CompletionEvent> completions_;
};

/// Chooses the K traces to merge, ascending by index. Returns nullopt while
/// the strategy's readiness precondition is unmet.
///   DirectMerge: all N = K ready, all indices.
///   EarlyReady:  >= K ready, the first K in completion order.
///   ShortestK:   all N ready, K smallest reasoning lengths, ties by index.
std::optional<std::vector<std::size_t>> select_traces(const TracePool &pool, const StrategyConfig &config);

/// Thinking step at which `config` allows merging to start given a
/// completion log over `pool_size` traces: the K-th completion for
/// EarlyReady, the last completion otherwise. nullopt if never.
std::optional<std::size_t> merge_start_step(std::span<const CompletionEvent> log, std::size_t pool_size,
                                            const StrategyConfig &config);

} // namespace tracemerge
