#pragma once

// Batch runs driven by a JSON config file, and evaluation of their output.

#include "tracemerge/backend.hpp"
#include "tracemerge/eval.hpp"
#include "tracemerge/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tracemerge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable that replaces an http backend's endpoint.
inline constexpr const char *kEndpointEnv = "TRACEMERGE_ENDPOINT";

struct ToyHashSpec {
    std::uint64_t seed = 0;
    std::uint32_t m = 4;
    std::uint32_t force_after = 0;
};

struct ToyScriptedSpec {
    std::filesystem::path path;
};

struct HttpSpec {
    std::string endpoint;
    std::optional<std::uint32_t> top;
    unsigned max_in_flight = 8;
};

using BackendSpec = std::variant<ToyHashSpec, ToyScriptedSpec, HttpSpec>;

/// One experiment. Relative paths are resolved against the config file's
/// directory.
///
///   {"vocabulary": {...}, "backend": {"type": "toy-hash", ...},
///    "strategy": {...}, "sampling": {...}, "merge_mode": "logits",
///    "pipeline": "two_stage", "vote": false,
///    "trim": {"min_block": 2, "max_block": 64},
///    "prompts": "prompts.jsonl", "output": "out.jsonl", "workers": 0}
struct RunConfig {
    EngineConfig engine;
    BackendSpec backend;
    std::filesystem::path prompts;
    std::filesystem::path output;
    /// 0 means one per hardware thread.
    unsigned workers = 0;

    /// Canonical JSON with defaults filled in. Paths are written as given
    /// relative to `base`.
    Json to_json(const std::filesystem::path &base = {}) const;
};

/// Throws ConfigError with the offending field path. `base` anchors
/// relative paths.
RunConfig run_config_from_json(const Json &j, const std::filesystem::path &base);
RunConfig load_run_config(const std::filesystem::path &path);

/// FNV-1a-64 hex digest of the canonical config, excluding prompts, output,
/// workers and the http endpoint: fields that move a run without changing
/// what it computes.
std::string config_hash(const RunConfig &config);

/// Builds the backend and checks it against the engine config. The http
/// endpoint honours kEndpointEnv.
std::unique_ptr<Backend> make_backend(const RunConfig &config);

struct Prompt {
    std::string id;
    Tokens tokens;
};

/// JSONL of {"id", "tokens"}. Rejects duplicate ids, out-of-vocabulary ids
/// and text prompts (no tokenizer is available).
std::vector<Prompt> load_prompts(const std::filesystem::path &path, const Vocabulary &vocab);

struct DecodeOptions {
    std::optional<std::size_t> limit;
    /// Keep the output file and skip ids already present; otherwise the
    /// output is truncated first.
    bool resume = false;
};

/// Decodes every prompt and writes one record per line in prompt order.
/// Returns kExitOk, kExitPartial when any record is invalid, or kExitConfig
/// when the config is rejected before decoding. Diagnostics go to `log`.
int run_decode(const RunConfig &config, const DecodeOptions &options, std::ostream &log);
int run_decode(const std::filesystem::path &config_path, const DecodeOptions &options, std::ostream &log);

/// Decodes prompts with a shared backend on `workers` threads; results come
/// back in input order.
std::vector<DecodeRecord> decode_prompts(std::span<const Prompt> prompts, const EngineConfig &engine,
                                         const std::string &hash, Backend &backend, unsigned workers);

enum class EvalMode { MajorityVote, Ensemble, PassAtK };

EvalMode eval_mode_from_string(std::string_view name);
std::string_view to_string(EvalMode mode);

struct EvalOptions {
    EvalMode mode = EvalMode::Ensemble;
    std::uint64_t k = 1;
    ExtractionRule rule = ExtractionRule::final_line();
    bool allow_mixed = false;
};

std::vector<DecodeRecord> load_records(const std::filesystem::path &path);

/// Metrics report for `records` against `gold`. Ids present on only one side
/// are listed under missing_in_gold / missing_in_results.
Json evaluate(std::span<const DecodeRecord> records, const GoldAnswers &gold, const EvalOptions &options);

/// Prints the report to `out`. Exit code is kExitPartial on id mismatches or
/// questions with fewer than k samples, kExitConfig on unreadable inputs or
/// mixed config hashes without allow_mixed.
int run_eval(const std::filesystem::path &results, const std::filesystem::path &gold, const EvalOptions &options,
             std::ostream &out, std::ostream &log);

} // namespace tracemerge
