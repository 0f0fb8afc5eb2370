#pragma once

#include "tracemerge/batch.hpp"
#include "tracemerge/core.hpp"
#include "tracemerge/logits.hpp"

#include <span>
#include <string>
#include <vector>

namespace tracemerge {

struct BackendDescriptor {
    std::uint32_t vocab_size = 0;
    TokenId eos_id = 0;
    TokenId pad_id = 0;
    bool supports_mask = false;
    std::uint32_t max_context = 0;
    std::string model;

    /// Throws ContractError when the session vocabulary disagrees.
    void check_compatible(const Vocabulary &vocab) const;

    friend bool operator==(const BackendDescriptor &, const BackendDescriptor &) = default;
};

/// Next-token logits provider. Each output row is a pure function of its
/// logical context, so batching and repetition never change results.
/// Implementations must tolerate concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendDescriptor &descriptor() const noexcept = 0;

    /// One finite vector of length vocab_size per context. Oversize contexts
    /// and unknown ids raise ContractError before the provider is called.
    std::vector<LogitVector> next_logits(std::span<const Tokens> contexts);

    /// Equal to next_logits over the batch's logical contexts. Requires
    /// supports_mask.
    std::vector<LogitVector> next_logits_masked(const PaddedBatch &batch);

protected:
    virtual std::vector<LogitVector> compute(std::span<const Tokens> contexts) = 0;

    /// Default strips masked positions and defers to compute().
    virtual std::vector<LogitVector> compute_masked(const PaddedBatch &batch);

private:
    void check_contexts(std::span<const Tokens> contexts) const;
    void check_output(const std::vector<LogitVector> &rows, std::size_t expected) const;
};

} // namespace tracemerge
