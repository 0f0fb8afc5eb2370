#include "tracemerge/toy_backends.hpp"

#include "tracemerge/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace tracemerge {

std::uint64_t fnv1a64(std::span<const TokenId> ids) noexcept {
    std::uint64_t h = kFnvOffsetBasis;
    for (TokenId id : ids) {
        for (int byte = 0; byte < 4; ++byte) {
            h ^= (id >> (8 * byte)) & 0xFFu;
            h *= kFnvPrime;
        }
    }
    return h;
}

namespace {

LogitVector hash_row(std::uint64_t key, bool force, const ToyHashParams &params) {
    LogitVector out;
    out.values.resize(params.vocab_size);
    for (std::uint32_t v = 0; v < params.vocab_size; ++v) {
        double logit = 10.0 * unit_double(splitmix64(key ^ v)) - 5.0;
        if (force && v == params.delimiter_first_id) logit += kToyDelimiterBias;
        out.values[v] = static_cast<float>(logit);
    }
    return out;
}

bool force_fires(std::size_t length, bool delimiter_seen, const ToyHashParams &params) {
    return params.force_after > 0 && length >= params.force_after && params.delimiter_first_id < params.vocab_size &&
           !delimiter_seen;
}

} // namespace

LogitVector toy_hash_logits(std::span<const TokenId> context, const ToyHashParams &params) {
    if (params.m < 1) throw InvariantError("toy hash window m must be >= 1");
    const std::size_t window = std::min<std::size_t>(context.size(), params.m);
    const std::uint64_t key = fnv1a64(context.last(window)) ^ params.seed;
    const bool seen = std::find(context.begin(), context.end(), params.delimiter_first_id) != context.end();
    return hash_row(key, force_fires(context.size(), seen, params), params);
}

LogitVector toy_hash_logits_masked(std::span<const TokenId> row, const std::vector<bool> &mask,
                                   const ToyHashParams &params) {
    if (params.m < 1) throw InvariantError("toy hash window m must be >= 1");
    if (mask.size() != row.size()) throw InvariantError("mask length differs from row length");
    // Walk the row backwards collecting the last m attended ids, so pads
    // never enter the window.
    Tokens window;
    std::size_t attended = 0;
    bool seen = false;
    for (std::size_t j = row.size(); j-- > 0;) {
        if (!mask[j]) continue;
        ++attended;
        if (window.size() < params.m) window.push_back(row[j]);
        if (row[j] == params.delimiter_first_id) seen = true;
    }
    std::reverse(window.begin(), window.end());
    return hash_row(fnv1a64(window) ^ params.seed, force_fires(attended, seen, params), params);
}

ToyHashBackend::ToyHashBackend(ToyHashParams params, TokenId eos_id, TokenId pad_id, std::uint32_t max_context)
    : params_(params) {
    if (params_.m < 1) throw InvariantError("toy hash window m must be >= 1");
    if (params_.vocab_size == 0 || params_.vocab_size > kMaxVocabSize) throw InvariantError("toy hash vocab out of range");
    descriptor_ = BackendDescriptor{params_.vocab_size, eos_id, pad_id, true, max_context, "toy-hash"};
}

std::vector<LogitVector> ToyHashBackend::compute_masked(const PaddedBatch &batch) {
    std::vector<LogitVector> out;
    out.reserve(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        out.push_back(toy_hash_logits_masked(batch.rows()[k], batch.mask()[k], params_));
    }
    return out;
}

std::vector<LogitVector> ToyHashBackend::compute(std::span<const Tokens> contexts) {
    std::vector<LogitVector> out;
    out.reserve(contexts.size());
    for (const auto &c : contexts) out.push_back(toy_hash_logits(c, params_));
    return out;
}

void LogitScript::validate() const {
    if (vocab_size == 0 || vocab_size > kMaxVocabSize) throw InvariantError("script vocab_size out of range");
    if (eos_id >= vocab_size || pad_id >= vocab_size) throw InvariantError("script eos/pad id out of range");
    auto check_row = [&](const std::vector<float> &row, const std::string &what) {
        if (row.size() != vocab_size) {
            throw InvariantError(what + " has " + std::to_string(row.size()) + " entries, vocab_size is " +
                                 std::to_string(vocab_size));
        }
        for (float x : row) {
            if (!std::isfinite(x)) throw InvariantError(what + " holds a non-finite logit");
        }
    };
    check_row(default_row, "default row");
    std::set<Tokens> keys;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string what = "script row " + std::to_string(i);
        if (rows[i].suffix.empty()) throw InvariantError(what + " has an empty suffix");
        for (TokenId t : rows[i].suffix) {
            if (t >= vocab_size) throw InvariantError(what + " suffix holds unknown id " + std::to_string(t));
        }
        if (!keys.insert(rows[i].suffix).second) throw InvariantError(what + " repeats an earlier suffix");
        check_row(rows[i].logits, what);
    }
}

namespace {

std::vector<float> floats_from_json(const Json &j, const std::string &path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    std::vector<float> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(static_cast<float>(json_detail::as_real(j[i], path + "[" + std::to_string(i) + "]")));
    }
    return out;
}

} // namespace

LogitScript LogitScript::from_json(const Json &j) {
    using namespace json_detail;
    LogitScript s;
    s.vocab_size = static_cast<std::uint32_t>(as_uint(require(j, "vocab_size", ""), "vocab_size", kMaxVocabSize));
    s.eos_id = static_cast<TokenId>(as_uint(require(j, "eos_id", ""), "eos_id", UINT32_MAX));
    s.pad_id = static_cast<TokenId>(as_uint(require(j, "pad_id", ""), "pad_id", UINT32_MAX));
    s.default_row = floats_from_json(require(j, "default", ""), "default");
    if (j.contains("rows")) {
        const Json &rows = j["rows"];
        if (!rows.is_array()) throw ConfigError("rows", "expected an array");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::string path = "rows[" + std::to_string(i) + "]";
            Row row;
            row.suffix = tokens_from_json(require(rows[i], "suffix", path), path + ".suffix");
            row.logits = floats_from_json(require(rows[i], "logits", path), path + ".logits");
            s.rows.push_back(std::move(row));
        }
    }
    try {
        s.validate();
    } catch (const InvariantError &e) {
        throw ConfigError("", e.what());
    }
    return s;
}

LogitScript LogitScript::load(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open logit script");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error &e) {
        throw ConfigError(path.string(), e.what());
    }
    return from_json(j);
}

Json LogitScript::to_json() const {
    Json rows_j = Json::array();
    for (const auto &r : rows) rows_j.push_back(Json{{"suffix", r.suffix}, {"logits", r.logits}});
    return Json{{"vocab_size", vocab_size},
                {"eos_id", eos_id},
                {"pad_id", pad_id},
                {"default", default_row},
                {"rows", std::move(rows_j)}};
}

LogitVector toy_scripted_logits(std::span<const TokenId> context, const LogitScript &script) {
    const LogitScript::Row *best = nullptr;
    for (const auto &row : script.rows) {
        const auto &key = row.suffix;
        if (key.size() > context.size()) continue;
        if (!std::equal(key.begin(), key.end(), context.end() - static_cast<std::ptrdiff_t>(key.size()))) continue;
        if (!best || key.size() > best->suffix.size()) best = &row;
    }
    return LogitVector{best ? best->logits : script.default_row};
}

ToyScriptedBackend::ToyScriptedBackend(LogitScript script, std::uint32_t max_context) : script_(std::move(script)) {
    script_.validate();
    descriptor_ = BackendDescriptor{script_.vocab_size, script_.eos_id, script_.pad_id, true, max_context, "toy-scripted"};
}

std::vector<LogitVector> ToyScriptedBackend::compute(std::span<const Tokens> contexts) {
    std::vector<LogitVector> out;
    out.reserve(contexts.size());
    for (const auto &c : contexts) out.push_back(toy_scripted_logits(c, script_));
    return out;
}

} // namespace tracemerge
