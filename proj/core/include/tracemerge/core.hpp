#pragma once

#include "tracemerge/error.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace tracemerge {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;

inline constexpr std::uint32_t kMaxVocabSize = 1u << 20;

/// Token-id space shared by the engine and its backend. The delimiter is a
/// sequence because real tokenizers split end-of-thinking markers.
class Vocabulary {
public:
    Vocabulary(std::uint32_t size, TokenId eos_id, TokenId pad_id, Tokens delimiter);

    std::uint32_t size() const noexcept { return size_; }
    TokenId eos_id() const noexcept { return eos_id_; }
    TokenId pad_id() const noexcept { return pad_id_; }
    const Tokens &delimiter() const noexcept { return delimiter_; }

    bool contains(TokenId id) const noexcept { return id < size_; }

    friend bool operator==(const Vocabulary &, const Vocabulary &) = default;

private:
    std::uint32_t size_;
    TokenId eos_id_;
    TokenId pad_id_;
    Tokens delimiter_;
};

enum class TracePhase { Thinking, Finished, Trimmed };

std::string_view to_string(TracePhase phase);
TracePhase trace_phase_from_string(std::string_view name);

/// One reasoning context. `delimiter_end` is the index just past the first
/// delimiter occurrence in `generated`; it equals the reasoning length.
class Trace {
public:
    /// A trace still thinking.
    Trace(Tokens prompt, Tokens generated);

    /// Validates: phase != Thinking <=> delimiter_end set, and
    /// generated[..delimiter_end] ends with `delimiter`.
    Trace(Tokens prompt, Tokens generated, TracePhase phase, std::optional<std::size_t> delimiter_end,
          std::span<const TokenId> delimiter);

    const Tokens &prompt() const noexcept { return prompt_; }
    const Tokens &generated() const noexcept { return generated_; }
    TracePhase phase() const noexcept { return phase_; }
    std::optional<std::size_t> delimiter_end() const noexcept { return delimiter_end_; }

    bool is_ready() const noexcept { return phase_ != TracePhase::Thinking; }

    /// Pre-delimiter length including the delimiter itself. Throws for a
    /// thinking trace.
    std::size_t reasoning_length() const;

    /// prompt ‖ generated[..delimiter_end]; the context answer decoding sees.
    Tokens reasoning_context() const;

    friend bool operator==(const Trace &, const Trace &) = default;

private:
    Tokens prompt_;
    Tokens generated_;
    TracePhase phase_ = TracePhase::Thinking;
    std::optional<std::size_t> delimiter_end_;
};

/// K ready traces plus the shared answer prefix. `step` always equals the
/// answer length.
class EnsembleSession {
public:
    explicit EnsembleSession(std::vector<Trace> traces, Tokens answer = {});

    const std::vector<Trace> &traces() const noexcept { return traces_; }
    const Tokens &answer() const noexcept { return answer_; }
    std::size_t step() const noexcept { return answer_.size(); }
    std::size_t size() const noexcept { return traces_.size(); }

    void append(TokenId token) { answer_.push_back(token); }

    /// Logical context of trace k extended by the shared answer.
    Tokens context(std::size_t k) const;

    friend bool operator==(const EnsembleSession &, const EnsembleSession &) = default;

private:
    std::vector<Trace> traces_;
    Tokens answer_;
};

struct SamplingPolicy {
    double temp_think = 0.6;
    double temp_answer = 0.6;
    std::optional<std::uint32_t> top_k;
    std::optional<double> top_p;
    double repetition_penalty = 1.0;
    std::uint64_t seed = 0;
    bool greedy = false;

    void validate() const;

    friend bool operator==(const SamplingPolicy &, const SamplingPolicy &) = default;
};

enum class StrategyKind { DirectMerge, EarlyReady, ShortestK };

std::string_view to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(std::string_view name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::DirectMerge;
    bool trim_suffix = false;
    std::uint32_t K = 1;
    std::uint32_t N = 1;
    std::uint32_t max_think_tokens = 256;
    std::uint32_t max_answer_tokens = 64;

    void validate() const;

    friend bool operator==(const StrategyConfig &, const StrategyConfig &) = default;
};

enum class StopReason { None, Eos, Length };

std::string_view to_string(StopReason reason);

/// Halts answer decoding at eos or at the length cap, whichever comes first.
/// The eos token itself is kept in the answer.
struct StopRule {
    TokenId eos_id = 0;
    std::uint32_t max_answer_tokens = 1;

    StopReason check(std::span<const TokenId> answer) const noexcept;

    friend bool operator==(const StopRule &, const StopRule &) = default;
};

} // namespace tracemerge
