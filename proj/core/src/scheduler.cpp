#include "tracemerge/scheduler.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace tracemerge {

std::optional<std::size_t> detect_delimiter(std::span<const TokenId> generated, std::span<const TokenId> delimiter) {
    if (delimiter.empty()) return std::nullopt;
    auto it = std::search(generated.begin(), generated.end(), delimiter.begin(), delimiter.end());
    if (it == generated.end()) return std::nullopt;
    return static_cast<std::size_t>(it - generated.begin()) + delimiter.size();
}

std::optional<std::size_t> detect_delimiter(const Trace &trace, const Vocabulary &vocab) {
    return detect_delimiter(trace.generated(), vocab.delimiter());
}

namespace {

// Number of consecutive copies of the final b tokens at the end of seq.
std::size_t trailing_copies(std::span<const TokenId> seq, std::size_t b) {
    const std::size_t n = seq.size();
    std::size_t m = 1;
    while ((m + 1) * b <= n &&
           std::equal(seq.end() - static_cast<std::ptrdiff_t>(b), seq.end(),
                      seq.end() - static_cast<std::ptrdiff_t>((m + 1) * b))) {
        ++m;
    }
    return m;
}

} // namespace

Tokens trim_repeated_suffix(std::span<const TokenId> reasoning, std::size_t b_min, std::size_t b_max) {
    if (b_min < 1) throw InvariantError("trim block length b_min must be >= 1");
    if (b_min > b_max) throw InvariantError("trim requires b_min <= b_max");

    const std::size_t upper = std::min(b_max, reasoning.size() / 2);
    std::size_t best_b = 0;
    std::size_t best_removed = 0;
    for (std::size_t b = upper; b >= b_min && b > 0; --b) {
        const std::size_t m = trailing_copies(reasoning, b);
        const std::size_t removed = (m - 1) * b;
        if (m >= 2 && removed > best_removed) {
            best_removed = removed;
            best_b = b;
        }
    }
    if (best_b == 0) return Tokens(reasoning.begin(), reasoning.end());
    return Tokens(reasoning.begin(), reasoning.end() - static_cast<std::ptrdiff_t>(best_removed));
}

Trace trim_trace(const Trace &trace, const Vocabulary &vocab, std::size_t b_min, std::size_t b_max) {
    if (!trace.is_ready()) throw InvariantError("cannot trim a trace that is still thinking");
    const auto &delim = vocab.delimiter();
    const std::size_t end = trace.reasoning_length();
    const std::span<const TokenId> body(trace.generated().data(), end - delim.size());
    Tokens trimmed = trim_repeated_suffix(body, b_min, b_max);
    if (trimmed.size() == body.size()) return trace;
    trimmed.insert(trimmed.end(), delim.begin(), delim.end());
    const std::size_t new_end = trimmed.size();
    return Trace(trace.prompt(), std::move(trimmed), TracePhase::Trimmed, new_end, delim);
}

TracePool::TracePool(std::vector<Trace> traces) : traces_(std::move(traces)) {
    // A pool built from already-finished traces gets a completion log in
    // (reasoning length, index) order.
    std::vector<CompletionEvent> events;
    for (std::size_t i = 0; i < traces_.size(); ++i) {
        if (traces_[i].is_ready()) events.push_back({traces_[i].reasoning_length(), i});
    }
    std::sort(events.begin(), events.end(), [](const CompletionEvent &a, const CompletionEvent &b) {
        return a.step < b.step || (a.step == b.step && a.trace < b.trace);
    });
    completions_ = std::move(events);
}

std::vector<std::size_t> TracePool::ready() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < traces_.size(); ++i) {
        if (traces_[i].is_ready()) out.push_back(i);
    }
    return out;
}

void TracePool::complete(std::size_t index, Trace finished, std::size_t step) {
    if (index >= traces_.size()) throw InvariantError("trace index out of range");
    if (traces_[index].is_ready()) throw InvariantError("trace " + std::to_string(index) + " already completed");
    if (!finished.is_ready()) throw InvariantError("completion requires a finished trace");
    if (!completions_.empty() && step < completions_.back().step) {
        throw InvariantError("completion events must arrive in step order");
    }
    traces_[index] = std::move(finished);
    completions_.push_back({step, index});
}

void TracePool::update(std::size_t index, Trace thinking) {
    if (index >= traces_.size()) throw InvariantError("trace index out of range");
    if (traces_[index].is_ready() || thinking.is_ready()) throw InvariantError("update applies to thinking traces only");
    traces_[index] = std::move(thinking);
}

std::optional<std::vector<std::size_t>> select_traces(const TracePool &pool, const StrategyConfig &config) {
    config.validate();
    if (pool.size() != config.N) {
        throw InvariantError("pool holds " + std::to_string(pool.size()) + " traces, config expects N=" +
                             std::to_string(config.N));
    }
    const std::size_t k = config.K;
    std::vector<std::size_t> chosen;

    switch (config.kind) {
    case StrategyKind::DirectMerge:
        if (pool.ready_count() < pool.size()) return std::nullopt;
        chosen.resize(pool.size());
        std::iota(chosen.begin(), chosen.end(), std::size_t{0});
        return chosen;

    case StrategyKind::EarlyReady:
        if (pool.ready_count() < k) return std::nullopt;
        for (std::size_t i = 0; i < k; ++i) chosen.push_back(pool.completions()[i].trace);
        break;

    case StrategyKind::ShortestK: {
        if (pool.ready_count() < pool.size()) return std::nullopt;
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto &traces = pool.traces();
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return traces[a].reasoning_length() < traces[b].reasoning_length();
        });
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        break;
    }
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::optional<std::size_t> merge_start_step(std::span<const CompletionEvent> log, std::size_t pool_size,
                                            const StrategyConfig &config) {
    const std::size_t needed = config.kind == StrategyKind::EarlyReady ? config.K : pool_size;
    if (needed == 0 || log.size() < needed) return std::nullopt;
    std::size_t latest = 0;
    for (std::size_t i = 0; i < needed; ++i) latest = std::max(latest, log[i].step);
    return latest;
}

} // namespace tracemerge
