#include "tracemerge/batch.hpp"

#include <string>

namespace tracemerge {

PaddedBatch::PaddedBatch(std::vector<Tokens> rows, std::vector<std::vector<bool>> mask, TokenId pad_id)
    : rows_(std::move(rows)), mask_(std::move(mask)), pad_id_(pad_id) {
    if (rows_.empty()) throw InvariantError("padded batch has no rows");
    if (mask_.size() != rows_.size()) throw InvariantError("mask row count differs from token row count");
    const std::size_t width = rows_.front().size();
    for (std::size_t k = 0; k < rows_.size(); ++k) {
        const std::string row = "row " + std::to_string(k);
        if (rows_[k].size() != width) throw InvariantError(row + " length differs from row 0");
        if (mask_[k].size() != width) throw InvariantError(row + " mask length differs from its tokens");
        bool attends = false;
        for (std::size_t j = 0; j < width; ++j) {
            if (mask_[k][j]) {
                attends = true;
            } else if (rows_[k][j] != pad_id_) {
                throw InvariantError(row + " masks position " + std::to_string(j) + " which is not a pad");
            }
        }
        if (!attends) throw InvariantError(row + " is entirely padding");
    }
}

Tokens PaddedBatch::logical_context(std::size_t k) const {
    const auto &row = rows_.at(k);
    const auto &m = mask_.at(k);
    Tokens out;
    out.reserve(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (m[j]) out.push_back(row[j]);
    }
    return out;
}

std::vector<Tokens> PaddedBatch::logical_contexts() const {
    std::vector<Tokens> out;
    out.reserve(rows_.size());
    for (std::size_t k = 0; k < rows_.size(); ++k) out.push_back(logical_context(k));
    return out;
}

void PaddedBatch::push_column(const Tokens &tokens, const std::vector<bool> &attend) {
    if (tokens.size() != rows_.size() || attend.size() != rows_.size()) {
        throw InvariantError("column size differs from batch size");
    }
    for (std::size_t k = 0; k < rows_.size(); ++k) {
        if (!attend[k] && tokens[k] != pad_id_) throw InvariantError("masked column entry must be pad_id");
    }
    for (std::size_t k = 0; k < rows_.size(); ++k) {
        rows_[k].push_back(tokens[k]);
        mask_[k].push_back(attend[k]);
    }
}

} // namespace tracemerge
