#include "tracemerge/record.hpp"

namespace tracemerge {

using namespace json_detail;

namespace {

Json optional_size(const std::optional<std::size_t> &v) { return v ? Json(*v) : Json(nullptr); }

std::optional<std::size_t> read_optional_size(const Json &j, const std::string &key, const std::string &path) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return static_cast<std::size_t>(as_uint(j[key], join(path, key)));
}

} // namespace

Json to_json(const DecodeRecord &r) {
    Json traces = Json::array();
    for (const auto &t : r.traces) {
        traces.push_back(Json{{"index", t.index},
                              {"generated", t.generated},
                              {"phase", std::string(to_string(t.phase))},
                              {"reasoning_length", optional_size(t.reasoning_length)},
                              {"completion_step", optional_size(t.completion_step)},
                              {"forced", t.forced},
                              {"selected", t.selected},
                              {"untrimmed_length", optional_size(t.untrimmed_length)}});
    }
    Json steps = Json::array();
    for (const auto &s : r.steps) steps.push_back(Json{{"token", s.token}, {"probability", s.probability}});

    Json j;
    j["schema_version"] = r.schema_version;
    j["id"] = r.id;
    j["config_hash"] = r.config_hash;
    j["seed"] = r.seed;
    j["strategy"] = r.strategy;
    j["K"] = r.K;
    j["N"] = r.N;
    j["trim_suffix"] = r.trim_suffix;
    j["merge_mode"] = r.merge_mode;
    j["pipeline"] = r.pipeline;
    j["prompt"] = r.prompt;
    j["traces"] = std::move(traces);
    j["selected"] = r.selected;
    j["thinking_steps"] = r.thinking_steps;
    j["merge_start_step"] = optional_size(r.merge_start_step);
    j["answer"] = r.answer;
    j["answer_text"] = r.answer_text;
    j["stop_reason"] = r.stop_reason;
    j["steps"] = std::move(steps);
    j["trace_answers"] = r.trace_answers;
    j["answer_after_delimiters"] = r.answer_after_delimiters;
    j["valid"] = r.valid;
    j["error"] = r.error;
    return j;
}

DecodeRecord decode_record_from_json(const Json &j) {
    require_object(j, "");
    DecodeRecord r;
    r.schema_version = static_cast<int>(as_uint(require(j, "schema_version", ""), "schema_version", 1u << 20));
    r.id = as_string(require(j, "id", ""), "id");
    // Externally produced result files may carry only the fields evaluation needs.
    if (j.contains("config_hash")) r.config_hash = as_string(j["config_hash"], "config_hash");
    if (j.contains("seed")) r.seed = as_uint(j["seed"], "seed");
    if (j.contains("strategy")) r.strategy = as_string(j["strategy"], "strategy");
    if (j.contains("K")) r.K = static_cast<std::uint32_t>(as_uint(j["K"], "K", UINT32_MAX));
    if (j.contains("N")) r.N = static_cast<std::uint32_t>(as_uint(j["N"], "N", UINT32_MAX));
    if (j.contains("trim_suffix")) r.trim_suffix = as_bool(j["trim_suffix"], "trim_suffix");
    if (j.contains("merge_mode")) r.merge_mode = as_string(j["merge_mode"], "merge_mode");
    if (j.contains("pipeline")) r.pipeline = as_string(j["pipeline"], "pipeline");
    if (j.contains("prompt")) r.prompt = tokens_from_json(j["prompt"], "prompt");
    if (j.contains("traces")) {
        const Json &traces = j["traces"];
        if (!traces.is_array()) throw ConfigError("traces", "expected an array");
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const std::string path = "traces[" + std::to_string(i) + "]";
            const Json &t = traces[i];
            TraceRecord tr;
            tr.index = static_cast<std::size_t>(as_uint(require(t, "index", path), join(path, "index")));
            tr.generated = tokens_from_json(require(t, "generated", path), join(path, "generated"));
            const auto phase = as_string(require(t, "phase", path), join(path, "phase"));
            try {
                tr.phase = trace_phase_from_string(phase);
            } catch (const InvariantError &e) {
                throw ConfigError(join(path, "phase"), e.what());
            }
            tr.reasoning_length = read_optional_size(t, "reasoning_length", path);
            tr.completion_step = read_optional_size(t, "completion_step", path);
            if (t.contains("forced")) tr.forced = as_bool(t["forced"], join(path, "forced"));
            if (t.contains("selected")) tr.selected = as_bool(t["selected"], join(path, "selected"));
            tr.untrimmed_length = read_optional_size(t, "untrimmed_length", path);
            r.traces.push_back(std::move(tr));
        }
    }
    if (j.contains("selected")) {
        const Json &sel = j["selected"];
        if (!sel.is_array()) throw ConfigError("selected", "expected an array");
        for (std::size_t i = 0; i < sel.size(); ++i) {
            r.selected.push_back(static_cast<std::size_t>(as_uint(sel[i], "selected[" + std::to_string(i) + "]")));
        }
    }
    if (j.contains("thinking_steps")) r.thinking_steps = static_cast<std::size_t>(as_uint(j["thinking_steps"], "thinking_steps"));
    r.merge_start_step = read_optional_size(j, "merge_start_step", "");
    if (j.contains("answer")) r.answer = tokens_from_json(j["answer"], "answer");
    if (j.contains("answer_text")) r.answer_text = as_string(j["answer_text"], "answer_text");
    if (j.contains("stop_reason")) r.stop_reason = as_string(j["stop_reason"], "stop_reason");
    if (j.contains("steps")) {
        const Json &steps = j["steps"];
        if (!steps.is_array()) throw ConfigError("steps", "expected an array");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const std::string path = "steps[" + std::to_string(i) + "]";
            StepRecord s;
            s.token = static_cast<TokenId>(as_uint(require(steps[i], "token", path), join(path, "token"), UINT32_MAX));
            s.probability = as_real(require(steps[i], "probability", path), join(path, "probability"));
            r.steps.push_back(s);
        }
    }
    if (j.contains("trace_answers")) {
        const Json &ans = j["trace_answers"];
        if (!ans.is_array()) throw ConfigError("trace_answers", "expected an array");
        for (std::size_t i = 0; i < ans.size(); ++i) {
            r.trace_answers.push_back(as_string(ans[i], "trace_answers[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("answer_after_delimiters")) {
        r.answer_after_delimiters = as_bool(j["answer_after_delimiters"], "answer_after_delimiters");
    }
    if (j.contains("valid")) r.valid = as_bool(j["valid"], "valid");
    if (j.contains("error")) r.error = as_string(j["error"], "error");
    return r;
}

std::string render_tokens(std::span<const TokenId> tokens, TokenId eos_id) {
    std::size_t n = tokens.size();
    if (n > 0 && tokens[n - 1] == eos_id) --n;
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += std::to_string(tokens[i]);
    }
    return out;
}

} // namespace tracemerge
