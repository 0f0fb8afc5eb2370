#pragma once

// Deterministic stand-ins for a language model. Both are pure integer
// arithmetic up to one final float conversion, so fixtures reproduce across
// platforms.

#include "tracemerge/backend.hpp"
#include "tracemerge/codec.hpp"

#include <filesystem>
#include <span>

namespace tracemerge {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xCBF29CE484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ull;
inline constexpr double kToyDelimiterBias = 20.0;

/// FNV-1a-64 over the ids serialized as little-endian 32-bit words.
std::uint64_t fnv1a64(std::span<const TokenId> ids) noexcept;

struct ToyHashParams {
    std::uint64_t seed = 0;
    std::uint32_t vocab_size = 16;
    /// Hash window: only the last m ids of the context matter.
    std::uint32_t m = 4;
    /// Contexts at least this long that do not yet contain
    /// delimiter_first_id get +20 on it. 0 disables the bias.
    std::uint32_t force_after = 0;
    TokenId delimiter_first_id = 0;
};

/// key = fnv1a64(last min(len, m) ids) ^ seed
/// logit[v] = 10 * unit_double(splitmix64(key ^ v)) - 5   (+20 on the
/// delimiter's first id when the force rule fires), rounded once to float.
LogitVector toy_hash_logits(std::span<const TokenId> context, const ToyHashParams &params);

/// The same function evaluated on a padded row: the window and the force
/// rule see attended positions only.
LogitVector toy_hash_logits_masked(std::span<const TokenId> row, const std::vector<bool> &mask,
                                   const ToyHashParams &params);

class ToyHashBackend final : public Backend {
public:
    ToyHashBackend(ToyHashParams params, TokenId eos_id, TokenId pad_id, std::uint32_t max_context = 1u << 20);

    const BackendDescriptor &descriptor() const noexcept override { return descriptor_; }
    const ToyHashParams &params() const noexcept { return params_; }

protected:
    std::vector<LogitVector> compute(std::span<const Tokens> contexts) override;
    std::vector<LogitVector> compute_masked(const PaddedBatch &batch) override;

private:
    ToyHashParams params_;
    BackendDescriptor descriptor_;
};

/// Hand-authored logit table keyed by context suffix.
struct LogitScript {
    struct Row {
        Tokens suffix;
        std::vector<float> logits;
    };

    std::uint32_t vocab_size = 0;
    TokenId eos_id = 0;
    TokenId pad_id = 0;
    std::vector<float> default_row;
    std::vector<Row> rows;

    /// Rejects rows whose length differs from vocab_size, non-finite values,
    /// empty or duplicate suffix keys.
    void validate() const;

    static LogitScript from_json(const Json &j);
    static LogitScript load(const std::filesystem::path &path);
    Json to_json() const;
};

/// Row of the longest scripted suffix matching the end of `context`, or the
/// default row.
LogitVector toy_scripted_logits(std::span<const TokenId> context, const LogitScript &script);

class ToyScriptedBackend final : public Backend {
public:
    explicit ToyScriptedBackend(LogitScript script, std::uint32_t max_context = 1u << 20);

    const BackendDescriptor &descriptor() const noexcept override { return descriptor_; }

protected:
    std::vector<LogitVector> compute(std::span<const Tokens> contexts) override;

private:
    LogitScript script_;
    BackendDescriptor descriptor_;
};

} // namespace tracemerge
