#pragma once

#include "tracemerge/codec.hpp"
#include "tracemerge/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tracemerge {

inline constexpr int kRecordSchemaVersion = 1;

struct TraceRecord {
    std::size_t index = 0;
    Tokens generated;
    TracePhase phase = TracePhase::Thinking;
    std::optional<std::size_t> reasoning_length;
    /// Thinking step at which the delimiter landed.
    std::optional<std::size_t> completion_step;
    /// Hit max_think_tokens and had the delimiter appended.
    bool forced = false;
    bool selected = false;
    /// Reasoning length before suffix trimming, when trimming changed it.
    std::optional<std::size_t> untrimmed_length;

    friend bool operator==(const TraceRecord &, const TraceRecord &) = default;
};

struct StepRecord {
    TokenId token = 0;
    /// Probability of the chosen token under the processed merged distribution.
    double probability = 0.0;

    friend bool operator==(const StepRecord &, const StepRecord &) = default;
};

/// One decoded prompt. Serialized as a single JSONL line.
struct DecodeRecord {
    int schema_version = kRecordSchemaVersion;
    std::string id;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string strategy;
    std::uint32_t K = 0;
    std::uint32_t N = 0;
    bool trim_suffix = false;
    std::string merge_mode;
    std::string pipeline;

    Tokens prompt;
    std::vector<TraceRecord> traces;
    std::vector<std::size_t> selected;
    /// Lockstep thinking steps executed before answering began.
    std::size_t thinking_steps = 0;
    std::optional<std::size_t> merge_start_step;

    Tokens answer;
    std::string answer_text;
    std::string stop_reason;
    std::vector<StepRecord> steps;
    /// Per-trace standalone answers for majority voting, when requested.
    std::vector<std::string> trace_answers;

    /// Every selected trace was past its delimiter before the first answer token.
    bool answer_after_delimiters = true;
    bool valid = true;
    std::string error;

    friend bool operator==(const DecodeRecord &, const DecodeRecord &) = default;
};

Json to_json(const DecodeRecord &record);
/// Throws ConfigError naming the offending field.
DecodeRecord decode_record_from_json(const Json &j);

/// Space-joined decimal ids with a trailing eos dropped. The engine has no
/// tokenizer; evaluation treats this as the answer text.
std::string render_tokens(std::span<const TokenId> tokens, TokenId eos_id);

} // namespace tracemerge
