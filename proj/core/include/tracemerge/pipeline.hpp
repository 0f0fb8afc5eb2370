#pragma once

// End-to-end ensemble decoding.
//
// Thinking runs N traces in lockstep: at step s every active trace holds s
// tokens. Trace k samples from its own stream Rng(seed ^ splitmix64(k)) at
// temp_think, penalizing its own generated tokens. A trace that reaches
// max_think_tokens - |delimiter| tokens without a delimiter emits the
// delimiter tokens verbatim (no draw) and is flagged as forced.
//
// Answering draws from Rng(seed). Each step queries the K selected contexts
// extended by the shared answer, merges them in ascending trace order and
// runs the processor stack with the shared answer as penalty history.

#include "tracemerge/backend.hpp"
#include "tracemerge/batch.hpp"
#include "tracemerge/core.hpp"
#include "tracemerge/record.hpp"
#include "tracemerge/scheduler.hpp"

#include <optional>
#include <string_view>

namespace tracemerge {

enum class MergeMode { Logits, Probs };
enum class PipelineShape { TwoStage, OneStep };

std::string_view to_string(MergeMode mode);
std::string_view to_string(PipelineShape shape);
MergeMode merge_mode_from_string(std::string_view name);
PipelineShape pipeline_shape_from_string(std::string_view name);

struct EngineConfig {
    Vocabulary vocab;
    StrategyConfig strategy{};
    SamplingPolicy policy{};
    MergeMode merge_mode = MergeMode::Logits;
    PipelineShape pipeline = PipelineShape::TwoStage;
    /// Also decode a standalone answer per selected trace for majority voting.
    bool vote = false;
    std::size_t trim_min_block = kDefaultTrimMinBlock;
    std::size_t trim_max_block = kDefaultTrimMaxBlock;

    /// Checks cross-field constraints and, when given, the backend
    /// descriptor. Throws ConfigError naming the field.
    void validate(const BackendDescriptor *backend = nullptr) const;
};

/// Outcome of the thinking phase.
struct ThinkingResult {
    TracePool pool;
    std::vector<bool> forced;
    /// Lockstep steps executed.
    std::size_t steps = 0;
};

/// Samples the N-trace pool. Early-Ready stops as soon as K traces are ready
/// and leaves the rest thinking.
ThinkingResult generate_thinking(const Tokens &prompt, const EngineConfig &config, Backend &backend);

/// Left-pads prompt ‖ reasoning-through-delimiter of every trace to the
/// longest context; pads are masked.
PaddedBatch align_contexts(const std::vector<Trace> &traces, const Vocabulary &vocab);

struct AnswerResult {
    Tokens answer;
    std::vector<StepRecord> steps;
    StopReason stop = StopReason::None;
};

/// Shared-answer decoding over `traces` (all ready). With `use_mask` the
/// backend receives the left-padded batch with the answer appended column by
/// column; otherwise the logical contexts.
AnswerResult decode_answer(const std::vector<Trace> &traces, const EngineConfig &config, Backend &backend,
                           bool use_mask);

DecodeRecord run_two_stage(const Tokens &prompt, const EngineConfig &config, Backend &backend);

/// DirectMerge only; the backend must support masks. Finished streams emit
/// masked pads until the longest stream finishes, then every step writes one
/// shared token into all rows.
DecodeRecord run_one_step(const Tokens &prompt, const EngineConfig &config, Backend &backend);

/// Dispatches on config.pipeline.
DecodeRecord run_pipeline(const Tokens &prompt, const EngineConfig &config, Backend &backend);

/// Plain single-sequence decoding: think as trace `trace_index` would, then
/// answer from that one context with Rng(answer_seed) and no merging. The
/// reference point for ensemble equivalence checks.
struct PlainResult {
    Trace trace;
    Tokens answer;
    bool forced = false;
};
PlainResult decode_plain(const Tokens &prompt, std::size_t trace_index, const EngineConfig &config, Backend &backend);

/// Answer decoding from one fixed ready trace with an explicit seed; no
/// merging involved.
Tokens decode_single_answer(const Trace &trace, const EngineConfig &config, Backend &backend, std::uint64_t seed);

} // namespace tracemerge
