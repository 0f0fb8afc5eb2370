#include "tracemerge/run.hpp"

#include "tracemerge/http_backend.hpp"
#include "tracemerge/toy_backends.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace tracemerge {

using namespace json_detail;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kU32 = UINT32_MAX;

void reject_unknown(const Json &j, std::initializer_list<std::string_view> known, const std::string &path) {
    for (const auto &[key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError(join(path, key), "unknown field");
        }
    }
}

template <typename F>
auto at_path(const std::string &path, F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError &) {
        throw;
    } catch (const InvariantError &e) {
        throw ConfigError(path, e.what());
    }
}

fs::path resolve(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string relative_to(const fs::path &p, const fs::path &base) {
    if (base.empty() || p.empty()) return p.generic_string();
    const fs::path rel = p.lexically_relative(base);
    return rel.empty() ? p.generic_string() : rel.generic_string();
}

BackendSpec backend_from_json(const Json &j, const Vocabulary &vocab, const fs::path &base) {
    const std::string path = "backend";
    require_object(j, path);
    const auto type = as_string(require(j, "type", path), join(path, "type"));
    if (type == "toy-hash") {
        reject_unknown(j, {"type", "seed", "vocab", "m", "force_after"}, path);
        ToyHashSpec spec;
        if (j.contains("seed")) spec.seed = as_uint(j["seed"], join(path, "seed"));
        if (j.contains("m")) spec.m = static_cast<std::uint32_t>(as_uint(j["m"], join(path, "m"), kU32));
        if (j.contains("force_after")) {
            spec.force_after = static_cast<std::uint32_t>(as_uint(j["force_after"], join(path, "force_after"), kU32));
        }
        if (j.contains("vocab") && as_uint(j["vocab"], join(path, "vocab"), kU32) != vocab.size()) {
            throw ConfigError(join(path, "vocab"), "disagrees with vocabulary.size");
        }
        if (spec.m == 0) throw ConfigError(join(path, "m"), "must be >= 1");
        return spec;
    }
    if (type == "toy-scripted") {
        reject_unknown(j, {"type", "path"}, path);
        return ToyScriptedSpec{resolve(base, as_string(require(j, "path", path), join(path, "path")))};
    }
    if (type == "http") {
        reject_unknown(j, {"type", "endpoint", "top", "max_in_flight"}, path);
        HttpSpec spec;
        spec.endpoint = as_string(require(j, "endpoint", path), join(path, "endpoint"));
        if (j.contains("top") && !j["top"].is_null()) {
            spec.top = static_cast<std::uint32_t>(as_uint(j["top"], join(path, "top"), kU32));
            if (*spec.top == 0) throw ConfigError(join(path, "top"), "must be >= 1");
        }
        if (j.contains("max_in_flight")) {
            spec.max_in_flight = static_cast<unsigned>(as_uint(j["max_in_flight"], join(path, "max_in_flight"), 1024));
            if (spec.max_in_flight == 0) throw ConfigError(join(path, "max_in_flight"), "must be >= 1");
        }
        return spec;
    }
    throw ConfigError(join(path, "type"), "unknown backend type '" + type + "' (toy-hash|toy-scripted|http)");
}

Json backend_to_json(const BackendSpec &spec, const fs::path &base, bool for_hash) {
    struct Visitor {
        const fs::path &base;
        bool for_hash;
        Json operator()(const ToyHashSpec &s) const {
            return Json{{"type", "toy-hash"}, {"seed", s.seed}, {"m", s.m}, {"force_after", s.force_after}};
        }
        Json operator()(const ToyScriptedSpec &s) const {
            return Json{{"type", "toy-scripted"}, {"path", relative_to(s.path, base)}};
        }
        Json operator()(const HttpSpec &s) const {
            Json j{{"type", "http"}, {"top", s.top ? Json(*s.top) : Json(nullptr)}};
            if (!for_hash) {
                j["endpoint"] = s.endpoint;
                j["max_in_flight"] = s.max_in_flight;
            }
            return j;
        }
    };
    return std::visit(Visitor{base, for_hash}, spec);
}

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::uint64_t fnv1a64_bytes(std::string_view bytes) {
    std::uint64_t h = kFnvOffsetBasis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

DecodeRecord decode_one(const Prompt &prompt, const EngineConfig &engine, const std::string &hash, Backend &backend) {
    DecodeRecord rec;
    try {
        rec = run_pipeline(prompt.tokens, engine, backend);
    } catch (const std::exception &e) {
        rec.strategy = std::string(to_string(engine.strategy.kind));
        rec.K = engine.strategy.K;
        rec.N = engine.strategy.N;
        rec.seed = engine.policy.seed;
        rec.trim_suffix = engine.strategy.trim_suffix;
        rec.merge_mode = std::string(to_string(engine.merge_mode));
        rec.pipeline = std::string(to_string(engine.pipeline));
        rec.prompt = prompt.tokens;
        rec.valid = false;
        rec.error = e.what();
    }
    rec.id = prompt.id;
    rec.config_hash = hash;
    return rec;
}

// Runs prompts on a pool of workers and hands records to `sink` in input
// order on the calling thread.
template <typename Sink>
void decode_ordered(std::span<const Prompt> prompts, const EngineConfig &engine, const std::string &hash,
                    Backend &backend, unsigned workers, Sink &&sink) {
    const std::size_t n = prompts.size();
    if (n == 0) return;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));

    std::vector<std::optional<DecodeRecord>> done(n);
    std::mutex mu;
    std::condition_variable cv;
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                    DecodeRecord rec = decode_one(prompts[i], engine, hash, backend);
                    {
                        std::lock_guard lock(mu);
                        done[i] = std::move(rec);
                    }
                    cv.notify_all();
                }
            });
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return done[i].has_value(); });
            DecodeRecord rec = std::move(*done[i]);
            done[i].reset();
            lock.unlock();
            sink(std::move(rec));
        }
    }
}

// Ids already written, after dropping a torn final line.
std::set<std::string> existing_ids(const fs::path &output) {
    std::set<std::string> ids;
    if (!fs::exists(output)) return ids;
    std::string content;
    {
        std::ifstream in(output, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        content = ss.str();
    }
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) {
        fs::resize_file(output, keep);
        content.resize(keep);
    }
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = output.generic_string() + ":" + std::to_string(lineno);
        try {
            ids.insert(as_string(require(Json::parse(line), "id", where), join(where, "id")));
        } catch (const Json::exception &e) {
            throw ConfigError(where, e.what());
        }
    }
    return ids;
}

} // namespace

Json RunConfig::to_json(const fs::path &base) const {
    Json j{{"vocabulary", tracemerge::to_json(engine.vocab)},
           {"backend", backend_to_json(backend, base, false)},
           {"strategy", tracemerge::to_json(engine.strategy)},
           {"sampling", tracemerge::to_json(engine.policy)},
           {"merge_mode", std::string(to_string(engine.merge_mode))},
           {"pipeline", std::string(to_string(engine.pipeline))},
           {"vote", engine.vote},
           {"trim", Json{{"min_block", engine.trim_min_block}, {"max_block", engine.trim_max_block}}},
           {"prompts", relative_to(prompts, base)},
           {"output", relative_to(output, base)},
           {"workers", workers}};
    return j;
}

RunConfig run_config_from_json(const Json &j, const fs::path &base) {
    require_object(j, "");
    reject_unknown(j,
                   {"vocabulary", "backend", "strategy", "sampling", "merge_mode", "pipeline", "vote", "trim",
                    "prompts", "output", "workers"},
                   "");
    const Json &vocab = require(j, "vocabulary", "");
    if (vocab.is_object()) reject_unknown(vocab, {"size", "eos_id", "pad_id", "delimiter"}, "vocabulary");
    const Json &strategy = require(j, "strategy", "");
    if (strategy.is_object()) {
        reject_unknown(strategy, {"kind", "K", "N", "trim_suffix", "max_think_tokens", "max_answer_tokens"},
                       "strategy");
    }
    if (j.contains("sampling") && j["sampling"].is_object()) {
        reject_unknown(j["sampling"],
                       {"temp_think", "temp_answer", "top_k", "top_p", "repetition_penalty", "seed", "greedy"},
                       "sampling");
    }
    EngineConfig engine{.vocab = vocabulary_from_json(vocab, "vocabulary")};
    engine.strategy = strategy_config_from_json(strategy, "strategy");
    if (j.contains("sampling")) engine.policy = sampling_policy_from_json(j["sampling"], "sampling");
    if (j.contains("merge_mode")) {
        const auto name = as_string(j["merge_mode"], "merge_mode");
        engine.merge_mode = at_path("merge_mode", [&] { return merge_mode_from_string(name); });
    }
    if (j.contains("pipeline")) {
        const auto name = as_string(j["pipeline"], "pipeline");
        engine.pipeline = at_path("pipeline", [&] { return pipeline_shape_from_string(name); });
    }
    if (j.contains("vote")) engine.vote = as_bool(j["vote"], "vote");
    if (j.contains("trim")) {
        const Json &t = j["trim"];
        require_object(t, "trim");
        reject_unknown(t, {"min_block", "max_block"}, "trim");
        if (t.contains("min_block")) engine.trim_min_block = as_uint(t["min_block"], "trim.min_block");
        if (t.contains("max_block")) engine.trim_max_block = as_uint(t["max_block"], "trim.max_block");
    }

    RunConfig config{engine, backend_from_json(require(j, "backend", ""), engine.vocab, base),
                     resolve(base, as_string(require(j, "prompts", ""), "prompts")),
                     resolve(base, as_string(require(j, "output", ""), "output"))};
    if (j.contains("workers")) config.workers = static_cast<unsigned>(as_uint(j["workers"], "workers", 4096));
    config.engine.validate();
    return config;
}

RunConfig load_run_config(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.generic_string(), "cannot open config");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error &e) {
        throw ConfigError(path.generic_string(), e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

std::string config_hash(const RunConfig &config) {
    Json j = config.to_json();
    j.erase("prompts");
    j.erase("output");
    j.erase("workers");
    j["backend"] = backend_to_json(config.backend, {}, true);
    if (auto *scripted = std::get_if<ToyScriptedSpec>(&config.backend)) {
        j["backend"]["path"] = scripted->path.filename().generic_string();
    }
    return hex64(fnv1a64_bytes(j.dump()));
}

std::unique_ptr<Backend> make_backend(const RunConfig &config) {
    const Vocabulary &vocab = config.engine.vocab;
    if (const auto *s = std::get_if<ToyHashSpec>(&config.backend)) {
        ToyHashParams params{s->seed, vocab.size(), s->m, s->force_after, vocab.delimiter().front()};
        return std::make_unique<ToyHashBackend>(params, vocab.eos_id(), vocab.pad_id());
    }
    if (const auto *s = std::get_if<ToyScriptedSpec>(&config.backend)) {
        return std::make_unique<ToyScriptedBackend>(LogitScript::load(s->path));
    }
    const auto &s = std::get<HttpSpec>(config.backend);
    HttpBackendOptions options;
    options.endpoint = s.endpoint;
    if (const char *env = std::getenv(kEndpointEnv); env && *env) options.endpoint = env;
    options.top = s.top;
    options.max_in_flight = s.max_in_flight;
    return std::make_unique<HttpBackend>(options, &vocab);
}

std::vector<Prompt> load_prompts(const fs::path &path, const Vocabulary &vocab) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.generic_string(), "cannot open prompts file");
    std::vector<Prompt> prompts;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        const std::string where = path.generic_string() + ":" + std::to_string(lineno);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error &e) {
            throw ConfigError(where, e.what());
        }
        require_object(j, where);
        Prompt p;
        p.id = as_string(require(j, "id", where), join(where, "id"));
        if (!j.contains("tokens")) {
            if (j.contains("text")) throw ConfigError(join(where, "text"), "text prompts need a tokenizer; supply tokens");
            throw ConfigError(join(where, "tokens"), "missing field");
        }
        p.tokens = tokens_from_json(j["tokens"], join(where, "tokens"));
        if (p.tokens.empty()) throw ConfigError(join(where, "tokens"), "prompt must not be empty");
        for (TokenId t : p.tokens) {
            if (!vocab.contains(t)) throw ConfigError(join(where, "tokens"), "id " + std::to_string(t) + " outside the vocabulary");
        }
        if (!seen.insert(p.id).second) throw ConfigError(join(where, "id"), "duplicate id '" + p.id + "'");
        prompts.push_back(std::move(p));
    }
    return prompts;
}

std::vector<DecodeRecord> decode_prompts(std::span<const Prompt> prompts, const EngineConfig &engine,
                                         const std::string &hash, Backend &backend, unsigned workers) {
    std::vector<DecodeRecord> out;
    out.reserve(prompts.size());
    decode_ordered(prompts, engine, hash, backend, workers, [&](DecodeRecord rec) { out.push_back(std::move(rec)); });
    return out;
}

int run_decode(const RunConfig &config, const DecodeOptions &options, std::ostream &log) {
    std::unique_ptr<Backend> backend;
    std::vector<Prompt> prompts;
    try {
        prompts = load_prompts(config.prompts, config.engine.vocab);
        backend = make_backend(config);
        config.engine.validate(&backend->descriptor());
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ContractError &e) {
        log << "config error: backend: " << e.what() << '\n';
        return kExitConfig;
    } catch (const BackendError &e) {
        log << "backend unavailable: " << e.what() << '\n';
        return kExitPartial;
    }

    if (options.limit && prompts.size() > *options.limit) prompts.resize(*options.limit);

    std::set<std::string> done;
    try {
        if (options.resume) done = existing_ids(config.output);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    std::erase_if(prompts, [&](const Prompt &p) { return done.contains(p.id); });
    if (!done.empty()) log << "resume: skipping " << done.size() << " recorded ids\n";

    if (config.output.has_parent_path()) fs::create_directories(config.output.parent_path());
    std::ofstream out(config.output, options.resume ? std::ios::app | std::ios::binary : std::ios::trunc | std::ios::binary);
    if (!out) {
        log << "config error: output: cannot open " << config.output.generic_string() << '\n';
        return kExitConfig;
    }

    const std::string hash = config_hash(config);
    std::size_t failed = 0;
    decode_ordered(prompts, config.engine, hash, *backend, config.workers, [&](DecodeRecord rec) {
        if (!rec.valid) {
            ++failed;
            log << "prompt " << rec.id << " failed: " << rec.error << '\n';
        }
        out << to_json(rec).dump() << '\n';
        out.flush();
    });
    log << "decoded " << prompts.size() << " prompts, " << failed << " failed\n";
    return failed ? kExitPartial : kExitOk;
}

int run_decode(const fs::path &config_path, const DecodeOptions &options, std::ostream &log) {
    std::optional<RunConfig> config;
    try {
        config.emplace(load_run_config(config_path));
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    return run_decode(*config, options, log);
}

EvalMode eval_mode_from_string(std::string_view name) {
    if (name == "mv") return EvalMode::MajorityVote;
    if (name == "ensemble") return EvalMode::Ensemble;
    if (name == "pass_at_k") return EvalMode::PassAtK;
    throw ConfigError("mode", "unknown eval mode '" + std::string(name) + "' (mv|ensemble|pass_at_k)");
}

std::string_view to_string(EvalMode mode) {
    switch (mode) {
    case EvalMode::MajorityVote: return "mv";
    case EvalMode::Ensemble: return "ensemble";
    case EvalMode::PassAtK: return "pass_at_k";
    }
    return "?";
}

std::vector<DecodeRecord> load_records(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.generic_string(), "cannot open results file");
    std::vector<DecodeRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path.generic_string() + ":" + std::to_string(lineno);
        try {
            records.push_back(decode_record_from_json(Json::parse(line)));
        } catch (const Json::parse_error &e) {
            throw ConfigError(where, e.what());
        } catch (const ConfigError &e) {
            throw ConfigError(where, e.what());
        }
    }
    return records;
}

Json evaluate(std::span<const DecodeRecord> records, const GoldAnswers &gold, const EvalOptions &options) {
    SummaryOptions so{&gold, options.rule, options.k};
    Json summary = summarize(records, so);
    const char *metric = options.mode == EvalMode::MajorityVote ? "mv_accuracy"
                         : options.mode == EvalMode::Ensemble   ? "ensemble_accuracy"
                                                                : "pass_at_k";
    std::set<std::string> result_ids;
    for (const auto &r : records) result_ids.insert(r.id);
    Json missing_gold = Json::array(), missing_results = Json::array();
    for (const auto &id : result_ids) {
        if (!gold.contains(id)) missing_gold.push_back(id);
    }
    for (const auto &[id, _] : gold) {
        if (!result_ids.contains(id)) missing_results.push_back(id);
    }
    Json report{{"mode", std::string(to_string(options.mode))},
                {"metric", metric},
                {"value", summary["overall"][metric]},
                {"records", records.size()},
                {"missing_in_gold", std::move(missing_gold)},
                {"missing_in_results", std::move(missing_results)},
                {"overall", summary["overall"]},
                {"groups", summary["groups"]}};
    if (options.mode == EvalMode::PassAtK) report["k"] = options.k;
    return report;
}

int run_eval(const fs::path &results, const fs::path &gold_path, const EvalOptions &options, std::ostream &out,
             std::ostream &log) {
    Json report;
    try {
        if (options.k < 1) throw ConfigError("k", "must be >= 1");
        const auto records = load_records(results);
        const auto gold = load_gold(gold_path.generic_string());
        if (!options.allow_mixed) {
            std::set<std::string> hashes;
            for (const auto &r : records) hashes.insert(r.config_hash);
            if (hashes.size() > 1) {
                throw ConfigError("config_hash", std::to_string(hashes.size()) +
                                                     " distinct config hashes in results; pass --allow-mixed to combine");
            }
        }
        report = evaluate(records, gold, options);
    } catch (const ConfigError &e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    out << report.dump(2) << '\n';
    int code = kExitOk;
    if (!report["missing_in_gold"].empty() || !report["missing_in_results"].empty()) {
        log << "id mismatch: " << report["missing_in_gold"].size() << " result ids without gold, "
            << report["missing_in_results"].size() << " gold ids without results\n";
        code = kExitPartial;
    }
    if (options.mode == EvalMode::PassAtK && report["overall"].value("questions_below_k", 0) > 0) {
        log << "pass_at_k: " << report["overall"]["questions_below_k"] << " questions have fewer than k samples\n";
        code = kExitPartial;
    }
    return code;
}

} // namespace tracemerge
