#include "tracemerge/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tracemerge {

namespace {

std::string id_str(TokenId id) { return std::to_string(id); }

bool ends_with(std::span<const TokenId> seq, std::span<const TokenId> suffix) {
    return seq.size() >= suffix.size() && std::equal(suffix.begin(), suffix.end(), seq.end() - suffix.size());
}

} // namespace

Vocabulary::Vocabulary(std::uint32_t size, TokenId eos_id, TokenId pad_id, Tokens delimiter)
    : size_(size), eos_id_(eos_id), pad_id_(pad_id), delimiter_(std::move(delimiter)) {
    if (size_ == 0 || size_ > kMaxVocabSize) {
        throw InvariantError("vocabulary size must be in [1, 2^20], got " + std::to_string(size_));
    }
    if (eos_id_ >= size_) throw InvariantError("eos_id " + id_str(eos_id_) + " out of range");
    if (pad_id_ >= size_) throw InvariantError("pad_id " + id_str(pad_id_) + " out of range");
    if (pad_id_ == eos_id_) throw InvariantError("pad_id must differ from eos_id");
    if (delimiter_.empty()) throw InvariantError("delimiter must be non-empty");
    for (TokenId t : delimiter_) {
        if (t >= size_) throw InvariantError("delimiter token " + id_str(t) + " out of range");
        if (t == pad_id_) throw InvariantError("delimiter must not contain pad_id");
    }
}

std::string_view to_string(TracePhase phase) {
    switch (phase) {
    case TracePhase::Thinking: return "Thinking";
    case TracePhase::Finished: return "Finished";
    case TracePhase::Trimmed: return "Trimmed";
    }
    return "?";
}

TracePhase trace_phase_from_string(std::string_view name) {
    if (name == "Thinking") return TracePhase::Thinking;
    if (name == "Finished") return TracePhase::Finished;
    if (name == "Trimmed") return TracePhase::Trimmed;
    throw InvariantError("unknown trace phase '" + std::string(name) + "'");
}

Trace::Trace(Tokens prompt, Tokens generated) : prompt_(std::move(prompt)), generated_(std::move(generated)) {}

Trace::Trace(Tokens prompt, Tokens generated, TracePhase phase, std::optional<std::size_t> delimiter_end,
             std::span<const TokenId> delimiter)
    : prompt_(std::move(prompt)), generated_(std::move(generated)), phase_(phase), delimiter_end_(delimiter_end) {
    const bool ready = phase_ != TracePhase::Thinking;
    if (ready != delimiter_end_.has_value()) {
        throw InvariantError("trace phase " + std::string(to_string(phase_)) +
                             (ready ? " requires" : " forbids") + " a delimiter_end");
    }
    if (!delimiter_end_) return;
    if (*delimiter_end_ > generated_.size()) {
        throw InvariantError("delimiter_end " + std::to_string(*delimiter_end_) + " past generated length " +
                             std::to_string(generated_.size()));
    }
    if (delimiter.empty() ||
        !ends_with(std::span<const TokenId>(generated_).first(*delimiter_end_), delimiter)) {
        throw InvariantError("delimiter_end " + std::to_string(*delimiter_end_) +
                             " does not terminate the delimiter sequence");
    }
}

std::size_t Trace::reasoning_length() const {
    if (!delimiter_end_) throw InvariantError("reasoning length of a trace that is still thinking");
    return *delimiter_end_;
}

Tokens Trace::reasoning_context() const {
    Tokens out = prompt_;
    const std::size_t end = delimiter_end_.value_or(generated_.size());
    out.insert(out.end(), generated_.begin(), generated_.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

EnsembleSession::EnsembleSession(std::vector<Trace> traces, Tokens answer)
    : traces_(std::move(traces)), answer_(std::move(answer)) {
    if (traces_.empty()) throw InvariantError("ensemble session needs at least one trace");
    for (std::size_t k = 0; k < traces_.size(); ++k) {
        if (!traces_[k].is_ready()) {
            throw InvariantError("trace " + std::to_string(k) + " has not passed its delimiter");
        }
    }
}

Tokens EnsembleSession::context(std::size_t k) const {
    Tokens out = traces_.at(k).reasoning_context();
    out.insert(out.end(), answer_.begin(), answer_.end());
    return out;
}

void SamplingPolicy::validate() const {
    if (!(temp_think > 0) || !std::isfinite(temp_think)) throw InvariantError("temp_think must be positive");
    if (!(temp_answer > 0) || !std::isfinite(temp_answer)) throw InvariantError("temp_answer must be positive");
    if (top_k && *top_k == 0) throw InvariantError("top_k must be positive");
    if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) throw InvariantError("top_p must lie in (0, 1]");
    if (!(repetition_penalty >= 1.0) || !std::isfinite(repetition_penalty)) {
        throw InvariantError("repetition_penalty must be >= 1");
    }
}

std::string_view to_string(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::DirectMerge: return "DirectMerge";
    case StrategyKind::EarlyReady: return "EarlyReady";
    case StrategyKind::ShortestK: return "ShortestK";
    }
    return "?";
}

StrategyKind strategy_kind_from_string(std::string_view name) {
    if (name == "DirectMerge") return StrategyKind::DirectMerge;
    if (name == "EarlyReady") return StrategyKind::EarlyReady;
    if (name == "ShortestK") return StrategyKind::ShortestK;
    throw InvariantError("unknown strategy kind '" + std::string(name) + "'");
}

void StrategyConfig::validate() const {
    if (K == 0) throw InvariantError("K must be positive");
    if (N < K) throw InvariantError("N must be >= K");
    if (kind == StrategyKind::DirectMerge && N != K) throw InvariantError("DirectMerge requires N = K");
    if (max_think_tokens == 0) throw InvariantError("max_think_tokens must be positive");
    if (max_answer_tokens == 0) throw InvariantError("max_answer_tokens must be positive");
}

std::string_view to_string(StopReason reason) {
    switch (reason) {
    case StopReason::None: return "none";
    case StopReason::Eos: return "eos";
    case StopReason::Length: return "length";
    }
    return "?";
}

StopReason StopRule::check(std::span<const TokenId> answer) const noexcept {
    if (!answer.empty() && answer.back() == eos_id) return StopReason::Eos;
    if (answer.size() >= max_answer_tokens) return StopReason::Length;
    return StopReason::None;
}

} // namespace tracemerge
