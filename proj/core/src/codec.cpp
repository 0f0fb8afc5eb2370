#include "tracemerge/codec.hpp"

#include <limits>

namespace tracemerge {

namespace json_detail {

std::string join(const std::string &path, const std::string &key) { return path.empty() ? key : path + "." + key; }

void require_object(const Json &j, const std::string &path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

const Json &require(const Json &j, const std::string &key, const std::string &path) {
    require_object(j, path);
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(join(path, key), "missing field");
    return *it;
}

std::uint64_t as_uint(const Json &j, const std::string &path, std::uint64_t max) {
    if (!j.is_number_integer()) throw ConfigError(path, "expected a non-negative integer");
    if (j.is_number_unsigned()) {
        const auto v = j.get<std::uint64_t>();
        if (v > max) throw ConfigError(path, "value " + std::to_string(v) + " too large");
        return v;
    }
    const auto v = j.get<std::int64_t>();
    if (v < 0) throw ConfigError(path, "expected a non-negative integer");
    if (static_cast<std::uint64_t>(v) > max) throw ConfigError(path, "value " + std::to_string(v) + " too large");
    return static_cast<std::uint64_t>(v);
}

double as_real(const Json &j, const std::string &path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

bool as_bool(const Json &j, const std::string &path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
    return j.get<bool>();
}

std::string as_string(const Json &j, const std::string &path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

} // namespace json_detail

using namespace json_detail;

namespace {

constexpr std::uint64_t kU32 = std::numeric_limits<std::uint32_t>::max();

template <typename F>
auto rethrow_at(const std::string &path, F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError &) {
        throw;
    } catch (const InvariantError &e) {
        throw ConfigError(path, e.what());
    }
}

} // namespace

Tokens tokens_from_json(const Json &j, const std::string &path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of token ids");
    Tokens out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(static_cast<TokenId>(as_uint(j[i], path + "[" + std::to_string(i) + "]", kU32)));
    }
    return out;
}

Json to_json(const Vocabulary &vocab) {
    return Json{{"size", vocab.size()},
                {"eos_id", vocab.eos_id()},
                {"pad_id", vocab.pad_id()},
                {"delimiter", vocab.delimiter()}};
}

Vocabulary vocabulary_from_json(const Json &j, const std::string &path) {
    const auto size = static_cast<std::uint32_t>(as_uint(require(j, "size", path), join(path, "size"), kU32));
    const auto eos = static_cast<TokenId>(as_uint(require(j, "eos_id", path), join(path, "eos_id"), kU32));
    const auto pad = static_cast<TokenId>(as_uint(require(j, "pad_id", path), join(path, "pad_id"), kU32));
    auto delim = tokens_from_json(require(j, "delimiter", path), join(path, "delimiter"));
    return rethrow_at(path, [&] { return Vocabulary(size, eos, pad, std::move(delim)); });
}

Json to_json(const Trace &trace) {
    Json j{{"prompt", trace.prompt()},
           {"generated", trace.generated()},
           {"phase", std::string(to_string(trace.phase()))}};
    j["delimiter_end"] = trace.delimiter_end() ? Json(*trace.delimiter_end()) : Json(nullptr);
    return j;
}

Trace trace_from_json(const Json &j, std::span<const TokenId> delimiter, const std::string &path) {
    auto prompt = tokens_from_json(require(j, "prompt", path), join(path, "prompt"));
    auto generated = tokens_from_json(require(j, "generated", path), join(path, "generated"));
    const auto phase_name = as_string(require(j, "phase", path), join(path, "phase"));
    const auto phase = rethrow_at(join(path, "phase"), [&] { return trace_phase_from_string(phase_name); });
    std::optional<std::size_t> end;
    const Json &end_j = require(j, "delimiter_end", path);
    if (!end_j.is_null()) end = static_cast<std::size_t>(as_uint(end_j, join(path, "delimiter_end")));
    return rethrow_at(path, [&] {
        return Trace(std::move(prompt), std::move(generated), phase, end, delimiter);
    });
}

Json to_json(const EnsembleSession &session) {
    Json traces = Json::array();
    for (const auto &t : session.traces()) traces.push_back(to_json(t));
    return Json{{"traces", std::move(traces)}, {"answer", session.answer()}, {"step", session.step()}};
}

EnsembleSession session_from_json(const Json &j, std::span<const TokenId> delimiter, const std::string &path) {
    const Json &traces_j = require(j, "traces", path);
    if (!traces_j.is_array()) throw ConfigError(join(path, "traces"), "expected an array");
    std::vector<Trace> traces;
    for (std::size_t i = 0; i < traces_j.size(); ++i) {
        traces.push_back(trace_from_json(traces_j[i], delimiter, join(path, "traces") + "[" + std::to_string(i) + "]"));
    }
    auto answer = tokens_from_json(require(j, "answer", path), join(path, "answer"));
    const auto step = as_uint(require(j, "step", path), join(path, "step"));
    if (step != answer.size()) throw ConfigError(join(path, "step"), "step must equal the answer length");
    return rethrow_at(path, [&] { return EnsembleSession(std::move(traces), std::move(answer)); });
}

Json to_json(const SamplingPolicy &p) {
    Json j{{"temp_think", p.temp_think},
           {"temp_answer", p.temp_answer},
           {"repetition_penalty", p.repetition_penalty},
           {"seed", p.seed},
           {"greedy", p.greedy}};
    j["top_k"] = p.top_k ? Json(*p.top_k) : Json(nullptr);
    j["top_p"] = p.top_p ? Json(*p.top_p) : Json(nullptr);
    return j;
}

SamplingPolicy sampling_policy_from_json(const Json &j, const std::string &path) {
    require_object(j, path);
    SamplingPolicy p;
    if (j.contains("temp_think")) p.temp_think = as_real(j["temp_think"], join(path, "temp_think"));
    // The answer temperature defaults to the thinking temperature.
    p.temp_answer = j.contains("temp_answer") ? as_real(j["temp_answer"], join(path, "temp_answer")) : p.temp_think;
    if (j.contains("top_k") && !j["top_k"].is_null()) {
        p.top_k = static_cast<std::uint32_t>(as_uint(j["top_k"], join(path, "top_k"), kU32));
    }
    if (j.contains("top_p") && !j["top_p"].is_null()) p.top_p = as_real(j["top_p"], join(path, "top_p"));
    if (j.contains("repetition_penalty")) {
        p.repetition_penalty = as_real(j["repetition_penalty"], join(path, "repetition_penalty"));
    }
    if (j.contains("seed")) p.seed = as_uint(j["seed"], join(path, "seed"));
    if (j.contains("greedy")) p.greedy = as_bool(j["greedy"], join(path, "greedy"));
    rethrow_at(path, [&] { p.validate(); });
    return p;
}

Json to_json(const StrategyConfig &c) {
    return Json{{"kind", std::string(to_string(c.kind))},
                {"trim_suffix", c.trim_suffix},
                {"K", c.K},
                {"N", c.N},
                {"max_think_tokens", c.max_think_tokens},
                {"max_answer_tokens", c.max_answer_tokens}};
}

StrategyConfig strategy_config_from_json(const Json &j, const std::string &path) {
    require_object(j, path);
    StrategyConfig c;
    const auto kind_name = as_string(require(j, "kind", path), join(path, "kind"));
    c.kind = rethrow_at(join(path, "kind"), [&] { return strategy_kind_from_string(kind_name); });
    if (j.contains("trim_suffix")) c.trim_suffix = as_bool(j["trim_suffix"], join(path, "trim_suffix"));
    c.K = static_cast<std::uint32_t>(as_uint(require(j, "K", path), join(path, "K"), kU32));
    c.N = j.contains("N") ? static_cast<std::uint32_t>(as_uint(j["N"], join(path, "N"), kU32)) : c.K;
    if (j.contains("max_think_tokens")) {
        c.max_think_tokens = static_cast<std::uint32_t>(as_uint(j["max_think_tokens"], join(path, "max_think_tokens"), kU32));
    }
    if (j.contains("max_answer_tokens")) {
        c.max_answer_tokens =
            static_cast<std::uint32_t>(as_uint(j["max_answer_tokens"], join(path, "max_answer_tokens"), kU32));
    }
    try {
        c.validate();
    } catch (const InvariantError &e) {
        // Point at the field the constraint is about.
        const std::string msg = e.what();
        const std::string field = msg.rfind("N ", 0) == 0 || msg.find("requires N") != std::string::npos ? "N"
                                  : msg.rfind("K ", 0) == 0                                              ? "K"
                                  : msg.rfind("max_think", 0) == 0 ? "max_think_tokens"
                                  : msg.rfind("max_answer", 0) == 0 ? "max_answer_tokens"
                                                                    : "";
        throw ConfigError(field.empty() ? path : join(path, field), msg);
    }
    return c;
}

Json to_json(const StopRule &r) { return Json{{"eos_id", r.eos_id}, {"max_answer_tokens", r.max_answer_tokens}}; }

StopRule stop_rule_from_json(const Json &j, const std::string &path) {
    StopRule r;
    r.eos_id = static_cast<TokenId>(as_uint(require(j, "eos_id", path), join(path, "eos_id"), kU32));
    r.max_answer_tokens =
        static_cast<std::uint32_t>(as_uint(require(j, "max_answer_tokens", path), join(path, "max_answer_tokens"), kU32));
    if (r.max_answer_tokens == 0) throw ConfigError(join(path, "max_answer_tokens"), "must be positive");
    return r;
}

} // namespace tracemerge
