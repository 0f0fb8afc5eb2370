#include "tracemerge/backend.hpp"

#include <cmath>

namespace tracemerge {

void BackendDescriptor::check_compatible(const Vocabulary &vocab) const {
    if (vocab_size != vocab.size()) {
        throw ContractError("backend vocab_size " + std::to_string(vocab_size) + " differs from session vocabulary " +
                            std::to_string(vocab.size()));
    }
    if (eos_id != vocab.eos_id()) throw ContractError("backend eos_id differs from session vocabulary");
    if (pad_id != vocab.pad_id()) throw ContractError("backend pad_id differs from session vocabulary");
}

std::vector<LogitVector> Backend::next_logits(std::span<const Tokens> contexts) {
    check_contexts(contexts);
    auto rows = compute(contexts);
    check_output(rows, contexts.size());
    return rows;
}

std::vector<LogitVector> Backend::next_logits_masked(const PaddedBatch &batch) {
    if (!descriptor().supports_mask) throw ContractError("backend does not support masked batches");
    if (batch.pad_id() != descriptor().pad_id) throw ContractError("batch pad_id differs from backend pad_id");
    check_contexts(batch.rows());
    auto rows = compute_masked(batch);
    check_output(rows, batch.size());
    return rows;
}

std::vector<LogitVector> Backend::compute_masked(const PaddedBatch &batch) {
    const auto contexts = batch.logical_contexts();
    return compute(contexts);
}

void Backend::check_contexts(std::span<const Tokens> contexts) const {
    const auto &desc = descriptor();
    for (std::size_t k = 0; k < contexts.size(); ++k) {
        if (contexts[k].size() > desc.max_context) {
            throw ContractError("context " + std::to_string(k) + " has " + std::to_string(contexts[k].size()) +
                                " tokens, max_context is " + std::to_string(desc.max_context));
        }
        for (TokenId t : contexts[k]) {
            if (t >= desc.vocab_size) {
                throw ContractError("context " + std::to_string(k) + " holds unknown token id " + std::to_string(t));
            }
        }
    }
}

void Backend::check_output(const std::vector<LogitVector> &rows, std::size_t expected) const {
    if (rows.size() != expected) {
        throw ContractError("backend returned " + std::to_string(rows.size()) + " rows for " +
                            std::to_string(expected) + " contexts");
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].size() != descriptor().vocab_size) {
            throw ContractError("backend row " + std::to_string(k) + " has length " + std::to_string(rows[k].size()));
        }
        for (float x : rows[k].values) {
            if (!std::isfinite(x)) throw ContractError("backend row " + std::to_string(k) + " holds a non-finite logit");
        }
    }
}

} // namespace tracemerge
