#include "tracemerge/pipeline.hpp"

#include "tracemerge/logits.hpp"
#include "tracemerge/rng.hpp"
#include "tracemerge/sampling.hpp"

#include <algorithm>

namespace tracemerge {

std::string_view to_string(MergeMode mode) { return mode == MergeMode::Logits ? "logits" : "probs"; }

std::string_view to_string(PipelineShape shape) { return shape == PipelineShape::TwoStage ? "two_stage" : "one_step"; }

MergeMode merge_mode_from_string(std::string_view name) {
    if (name == "logits") return MergeMode::Logits;
    if (name == "probs") return MergeMode::Probs;
    throw InvariantError("unknown merge mode '" + std::string(name) + "' (expected logits|probs)");
}

PipelineShape pipeline_shape_from_string(std::string_view name) {
    if (name == "two_stage") return PipelineShape::TwoStage;
    if (name == "one_step") return PipelineShape::OneStep;
    throw InvariantError("unknown pipeline '" + std::string(name) + "' (expected two_stage|one_step)");
}

void EngineConfig::validate(const BackendDescriptor *backend) const {
    try {
        strategy.validate();
    } catch (const InvariantError &e) {
        throw ConfigError("strategy", e.what());
    }
    try {
        policy.validate();
    } catch (const InvariantError &e) {
        throw ConfigError("sampling", e.what());
    }
    if (strategy.max_think_tokens < vocab.delimiter().size()) {
        throw ConfigError("strategy.max_think_tokens", "must be at least the delimiter length");
    }
    if (trim_min_block < 1 || trim_min_block > trim_max_block) {
        throw ConfigError("trim", "block lengths must satisfy 1 <= min <= max");
    }
    if (pipeline == PipelineShape::OneStep) {
        if (strategy.kind != StrategyKind::DirectMerge) {
            throw ConfigError("pipeline", "one_step requires strategy.kind DirectMerge, got " +
                                              std::string(to_string(strategy.kind)));
        }
        if (strategy.trim_suffix) throw ConfigError("pipeline", "one_step does not support strategy.trim_suffix");
        if (backend && !backend->supports_mask) {
            throw ConfigError("pipeline", "one_step requires a backend with supports_mask");
        }
    }
    if (backend) {
        try {
            backend->check_compatible(vocab);
        } catch (const ContractError &e) {
            throw ConfigError("backend", e.what());
        }
    }
}

namespace {

bool ends_with(const Tokens &seq, const Tokens &suffix) {
    return seq.size() >= suffix.size() && std::equal(suffix.begin(), suffix.end(), seq.end() - static_cast<std::ptrdiff_t>(suffix.size()));
}

Tokens concat(const Tokens &a, const Tokens &b) {
    Tokens out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

// One thinking stream. Past the force threshold it spells out the delimiter
// without consulting the model.
class ThinkingStream {
public:
    ThinkingStream(std::uint64_t seed, const EngineConfig &config)
        : rng_(seed), config_(&config),
          force_from_(config.strategy.max_think_tokens - config.vocab.delimiter().size()) {}

    const Tokens &generated() const noexcept { return generated_; }
    bool done() const noexcept { return done_; }
    bool forced() const noexcept { return forced_; }
    bool needs_logits() const noexcept { return !done_ && generated_.size() < force_from_; }

    /// Advances by one token; `logits` is read only when needs_logits().
    /// Returns true when the delimiter completed on this step.
    bool advance(const LogitVector *logits) {
        TokenId next;
        if (needs_logits()) {
            std::vector<double> scores(logits->values.begin(), logits->values.end());
            next = run_processors(scores, generated_, config_->policy.temp_think, config_->policy, rng_).token;
        } else {
            next = config_->vocab.delimiter()[generated_.size() - force_from_];
            forced_ = true;
        }
        generated_.push_back(next);
        done_ = ends_with(generated_, config_->vocab.delimiter());
        return done_;
    }

    Trace finished(const Tokens &prompt) const {
        return Trace(prompt, generated_, TracePhase::Finished, generated_.size(), config_->vocab.delimiter());
    }

private:
    Rng rng_;
    const EngineConfig *config_;
    std::size_t force_from_;
    Tokens generated_;
    bool done_ = false;
    bool forced_ = false;
};

StepChoice merged_choice(const std::vector<LogitVector> &rows, const Tokens &answer, const EngineConfig &config,
                         Rng &rng) {
    if (config.merge_mode == MergeMode::Logits) return process_merged(merge_logits(rows), answer, config.policy, rng);
    return process_merged(merge_probs(rows, config.policy.temp_answer), answer, config.policy, rng);
}

void decode_answer_into(const std::vector<Trace> &traces, const EngineConfig &config, Backend &backend, bool use_mask,
                        AnswerResult &out) {
    EnsembleSession session(traces);
    Rng rng(config.policy.seed);
    const StopRule stop{config.vocab.eos_id(), config.strategy.max_answer_tokens};
    std::optional<PaddedBatch> batch;
    if (use_mask) batch = align_contexts(traces, config.vocab);

    while ((out.stop = stop.check(session.answer())) == StopReason::None) {
        std::vector<LogitVector> rows;
        if (batch) {
            rows = backend.next_logits_masked(*batch);
        } else {
            std::vector<Tokens> contexts;
            for (std::size_t k = 0; k < session.size(); ++k) contexts.push_back(session.context(k));
            rows = backend.next_logits(contexts);
        }
        const StepChoice choice = merged_choice(rows, session.answer(), config, rng);
        session.append(choice.token);
        if (batch) batch->push_column(Tokens(session.size(), choice.token), std::vector<bool>(session.size(), true));
        out.answer.push_back(choice.token);
        out.steps.push_back(StepRecord{choice.token, choice.probability});
    }
}

void check_prompt(const Tokens &prompt, const Vocabulary &vocab) {
    if (prompt.empty()) throw InvariantError("prompt must hold at least one token");
    for (TokenId t : prompt) {
        if (!vocab.contains(t)) throw InvariantError("prompt token " + std::to_string(t) + " outside the vocabulary");
    }
}

DecodeRecord base_record(const Tokens &prompt, const EngineConfig &config) {
    DecodeRecord rec;
    rec.seed = config.policy.seed;
    rec.strategy = std::string(to_string(config.strategy.kind));
    rec.K = config.strategy.K;
    rec.N = config.strategy.N;
    rec.trim_suffix = config.strategy.trim_suffix;
    rec.merge_mode = std::string(to_string(config.merge_mode));
    rec.pipeline = std::string(to_string(config.pipeline));
    rec.prompt = prompt;
    return rec;
}

void fill_traces(DecodeRecord &rec, const TracePool &pool, const std::vector<bool> &forced,
                 const std::vector<std::size_t> &selected, const std::vector<Trace> &merged_traces) {
    rec.traces.clear();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const Trace &t = pool.traces()[i];
        TraceRecord tr;
        tr.index = i;
        tr.generated = t.generated();
        tr.phase = t.phase();
        if (t.is_ready()) tr.reasoning_length = t.reasoning_length();
        tr.forced = i < forced.size() && forced[i];
        rec.traces.push_back(std::move(tr));
    }
    for (const auto &ev : pool.completions()) rec.traces[ev.trace].completion_step = ev.step;
    for (std::size_t j = 0; j < selected.size(); ++j) {
        TraceRecord &tr = rec.traces[selected[j]];
        tr.selected = true;
        if (j < merged_traces.size() && merged_traces[j].phase() == TracePhase::Trimmed) {
            tr.untrimmed_length = tr.reasoning_length;
            tr.generated = merged_traces[j].generated();
            tr.phase = TracePhase::Trimmed;
            tr.reasoning_length = merged_traces[j].reasoning_length();
        }
    }
    rec.selected = selected;
}

bool delimiters_precede_answer(const DecodeRecord &rec) {
    if (rec.answer.empty()) return true;
    for (std::size_t idx : rec.selected) {
        const auto &tr = rec.traces[idx];
        if (!tr.completion_step || *tr.completion_step > rec.thinking_steps) return false;
    }
    return !rec.selected.empty();
}

void add_votes(DecodeRecord &rec, const std::vector<Trace> &traces, const std::vector<std::size_t> &selected,
               const EngineConfig &config, Backend &backend) {
    if (!config.vote) return;
    for (std::size_t j = 0; j < traces.size(); ++j) {
        const Tokens answer = decode_single_answer(traces[j], config, backend, voting_seed(config.policy.seed, selected[j]));
        rec.trace_answers.push_back(render_tokens(answer, config.vocab.eos_id()));
    }
}

void finish_answer(DecodeRecord &rec, const AnswerResult &answer, const EngineConfig &config) {
    rec.answer = answer.answer;
    rec.steps = answer.steps;
    rec.stop_reason = std::string(to_string(answer.stop));
    rec.answer_text = render_tokens(rec.answer, config.vocab.eos_id());
}

} // namespace

ThinkingResult generate_thinking(const Tokens &prompt, const EngineConfig &config, Backend &backend) {
    config.validate(&backend.descriptor());
    check_prompt(prompt, config.vocab);
    const std::size_t n = config.strategy.N;
    std::vector<ThinkingStream> streams;
    streams.reserve(n);
    for (std::size_t k = 0; k < n; ++k) streams.emplace_back(thinking_seed(config.policy.seed, k), config);

    ThinkingResult result{TracePool(std::vector<Trace>(n, Trace(prompt, {}))), {}, 0};
    auto &pool = result.pool;
    const bool early = config.strategy.kind == StrategyKind::EarlyReady;
    auto finished = [&] { return early ? pool.ready_count() >= config.strategy.K : pool.ready_count() == n; };

    while (!finished()) {
        ++result.steps;
        std::vector<std::size_t> querying;
        std::vector<Tokens> contexts;
        for (std::size_t k = 0; k < n; ++k) {
            if (streams[k].needs_logits()) {
                querying.push_back(k);
                contexts.push_back(concat(prompt, streams[k].generated()));
            }
        }
        std::vector<LogitVector> rows;
        if (!contexts.empty()) rows = backend.next_logits(contexts);

        std::size_t q = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (streams[k].done()) continue;
            const bool uses = q < querying.size() && querying[q] == k;
            if (streams[k].advance(uses ? &rows[q] : nullptr)) {
                pool.complete(k, streams[k].finished(prompt), result.steps);
            }
            if (uses) ++q;
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (!streams[k].done()) pool.update(k, Trace(prompt, streams[k].generated()));
        result.forced.push_back(streams[k].forced());
    }
    return result;
}

PaddedBatch align_contexts(const std::vector<Trace> &traces, const Vocabulary &vocab) {
    if (traces.empty()) throw InvariantError("align_contexts needs at least one trace");
    std::vector<Tokens> contexts;
    std::size_t width = 0;
    for (const auto &t : traces) {
        if (!t.is_ready()) throw InvariantError("align_contexts requires finished traces");
        contexts.push_back(t.reasoning_context());
        width = std::max(width, contexts.back().size());
    }
    std::vector<Tokens> rows;
    std::vector<std::vector<bool>> mask;
    for (const auto &c : contexts) {
        const std::size_t pads = width - c.size();
        Tokens row(pads, vocab.pad_id());
        row.insert(row.end(), c.begin(), c.end());
        std::vector<bool> m(width, true);
        std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(pads), false);
        rows.push_back(std::move(row));
        mask.push_back(std::move(m));
    }
    return PaddedBatch(std::move(rows), std::move(mask), vocab.pad_id());
}

AnswerResult decode_answer(const std::vector<Trace> &traces, const EngineConfig &config, Backend &backend,
                           bool use_mask) {
    AnswerResult out;
    decode_answer_into(traces, config, backend, use_mask, out);
    return out;
}

DecodeRecord run_two_stage(const Tokens &prompt, const EngineConfig &config, Backend &backend) {
    DecodeRecord rec = base_record(prompt, config);
    config.validate(&backend.descriptor());

    std::optional<ThinkingResult> thinking;
    std::vector<std::size_t> selected;
    std::vector<Trace> merged;
    AnswerResult answer;
    try {
        thinking = generate_thinking(prompt, config, backend);
        rec.thinking_steps = thinking->steps;
        const auto &pool = thinking->pool;
        selected = select_traces(pool, config.strategy).value();
        rec.merge_start_step = merge_start_step(pool.completions(), pool.size(), config.strategy);
        for (std::size_t idx : selected) {
            const Trace &t = pool.traces()[idx];
            merged.push_back(config.strategy.trim_suffix
                                 ? trim_trace(t, config.vocab, config.trim_min_block, config.trim_max_block)
                                 : t);
        }
        decode_answer_into(merged, config, backend, backend.descriptor().supports_mask, answer);
        finish_answer(rec, answer, config);
        fill_traces(rec, pool, thinking->forced, selected, merged);
        add_votes(rec, merged, selected, config, backend);
    } catch (const BackendError &e) {
        rec.valid = false;
        rec.error = std::string(e.retryable() ? "transport" : "contract") + ": " + e.what();
        finish_answer(rec, answer, config);
        if (thinking) fill_traces(rec, thinking->pool, thinking->forced, selected, merged);
    }
    rec.answer_after_delimiters = delimiters_precede_answer(rec);
    return rec;
}

DecodeRecord run_one_step(const Tokens &prompt, const EngineConfig &config, Backend &backend) {
    DecodeRecord rec = base_record(prompt, config);
    if (config.pipeline != PipelineShape::OneStep) {
        EngineConfig one = config;
        one.pipeline = PipelineShape::OneStep;
        one.validate(&backend.descriptor());
    } else {
        config.validate(&backend.descriptor());
    }
    check_prompt(prompt, config.vocab);
    rec.pipeline = std::string(to_string(PipelineShape::OneStep));

    const std::size_t n = config.strategy.N;
    const TokenId pad = config.vocab.pad_id();
    std::vector<ThinkingStream> streams;
    for (std::size_t k = 0; k < n; ++k) streams.emplace_back(thinking_seed(config.policy.seed, k), config);
    PaddedBatch batch(std::vector<Tokens>(n, prompt), std::vector<std::vector<bool>>(n, std::vector<bool>(prompt.size(), true)),
                      pad);
    TracePool pool(std::vector<Trace>(n, Trace(prompt, {})));
    std::vector<std::size_t> selected;
    std::vector<Trace> merged;
    std::vector<bool> forced(n, false);
    AnswerResult answer;

    try {
        // Thinking: every row advances each step; finished rows emit masked pads.
        while (pool.ready_count() < n) {
            ++rec.thinking_steps;
            const auto rows = backend.next_logits_masked(batch);
            Tokens column(n, pad);
            std::vector<bool> attend(n, false);
            std::vector<std::size_t> completed;
            for (std::size_t k = 0; k < n; ++k) {
                if (streams[k].done()) continue;
                if (streams[k].advance(&rows[k])) completed.push_back(k);
                column[k] = streams[k].generated().back();
                attend[k] = true;
            }
            batch.push_column(column, attend);
            for (std::size_t k : completed) pool.complete(k, streams[k].finished(prompt), rec.thinking_steps);
        }
        for (std::size_t k = 0; k < n; ++k) forced[k] = streams[k].forced();
        selected = select_traces(pool, config.strategy).value();
        rec.merge_start_step = merge_start_step(pool.completions(), n, config.strategy);
        merged = pool.traces();

        // Answering: all streams share each token.
        Rng rng(config.policy.seed);
        const StopRule stop{config.vocab.eos_id(), config.strategy.max_answer_tokens};
        while ((answer.stop = stop.check(answer.answer)) == StopReason::None) {
            const auto rows = backend.next_logits_masked(batch);
            const StepChoice choice = merged_choice(rows, answer.answer, config, rng);
            answer.answer.push_back(choice.token);
            answer.steps.push_back(StepRecord{choice.token, choice.probability});
            batch.push_column(Tokens(n, choice.token), std::vector<bool>(n, true));
        }
        finish_answer(rec, answer, config);
        fill_traces(rec, pool, forced, selected, merged);
        add_votes(rec, merged, selected, config, backend);
    } catch (const BackendError &e) {
        rec.valid = false;
        rec.error = std::string(e.retryable() ? "transport" : "contract") + ": " + e.what();
        finish_answer(rec, answer, config);
        fill_traces(rec, pool, forced, selected, merged);
    }
    rec.answer_after_delimiters = delimiters_precede_answer(rec);
    return rec;
}

DecodeRecord run_pipeline(const Tokens &prompt, const EngineConfig &config, Backend &backend) {
    return config.pipeline == PipelineShape::OneStep ? run_one_step(prompt, config, backend)
                                                     : run_two_stage(prompt, config, backend);
}

Tokens decode_single_answer(const Trace &trace, const EngineConfig &config, Backend &backend, std::uint64_t seed) {
    if (!trace.is_ready()) throw InvariantError("answer decoding requires a finished trace");
    Rng rng(seed);
    const Tokens context = trace.reasoning_context();
    const StopRule stop{config.vocab.eos_id(), config.strategy.max_answer_tokens};
    Tokens answer;
    while (stop.check(answer) == StopReason::None) {
        const std::vector<Tokens> one{concat(context, answer)};
        const LogitVector logits = backend.next_logits(one).front();
        std::vector<double> scores(logits.values.begin(), logits.values.end());
        answer.push_back(run_processors(scores, answer, config.policy.temp_answer, config.policy, rng).token);
    }
    return answer;
}

PlainResult decode_plain(const Tokens &prompt, std::size_t trace_index, const EngineConfig &config, Backend &backend) {
    check_prompt(prompt, config.vocab);
    const auto &delim = config.vocab.delimiter();
    const std::size_t force_from = config.strategy.max_think_tokens - delim.size();
    Rng rng(thinking_seed(config.policy.seed, trace_index));
    Tokens generated;
    bool forced = false;
    while (!ends_with(generated, delim)) {
        TokenId next;
        if (generated.size() >= force_from) {
            next = delim[generated.size() - force_from];
            forced = true;
        } else {
            const std::vector<Tokens> one{concat(prompt, generated)};
            const LogitVector logits = backend.next_logits(one).front();
            std::vector<double> scores(logits.values.begin(), logits.values.end());
            next = run_processors(scores, generated, config.policy.temp_think, config.policy, rng).token;
        }
        generated.push_back(next);
    }
    const std::size_t end = generated.size();
    Trace trace(prompt, std::move(generated), TracePhase::Finished, end, delim);
    Tokens answer = decode_single_answer(trace, config, backend, config.policy.seed);
    return PlainResult{std::move(trace), std::move(answer), forced};
}

} // namespace tracemerge
