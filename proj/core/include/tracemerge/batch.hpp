#pragma once

#include "tracemerge/core.hpp"

#include <vector>

namespace tracemerge {

/// K rows of equal length L with an attend mask. Masked positions hold
/// pad_id and are invisible to the model; every row attends to at least one
/// position. Left-padded batches (from align_contexts) mask a leading run;
/// the one-step pipeline also masks the pads a finished stream emits while
/// it waits for longer streams.
class PaddedBatch {
public:
    PaddedBatch(std::vector<Tokens> rows, std::vector<std::vector<bool>> mask, TokenId pad_id);

    const std::vector<Tokens> &rows() const noexcept { return rows_; }
    const std::vector<std::vector<bool>> &mask() const noexcept { return mask_; }
    TokenId pad_id() const noexcept { return pad_id_; }
    std::size_t size() const noexcept { return rows_.size(); }
    std::size_t width() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }

    /// Row k with masked positions removed.
    Tokens logical_context(std::size_t k) const;
    std::vector<Tokens> logical_contexts() const;

    /// Appends one column: `tokens[k]` attended when `attend[k]`, else must be pad_id.
    void push_column(const Tokens &tokens, const std::vector<bool> &attend);

private:
    std::vector<Tokens> rows_;
    std::vector<std::vector<bool>> mask_;
    TokenId pad_id_;
};

} // namespace tracemerge
