#include "tracemerge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

namespace tracemerge {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Canonical form of [+-]digits[.digits], or the input when it is not numeric.
std::string canonical_number(const std::string &s) {
    std::string_view body = s;
    bool negative = false;
    if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
        negative = body.front() == '-';
        body.remove_prefix(1);
    }
    const auto dot = body.find('.');
    std::string_view int_part = body.substr(0, dot);
    std::string_view frac_part = dot == std::string_view::npos ? std::string_view{} : body.substr(dot + 1);
    if (!all_digits(int_part)) return s;
    if (dot != std::string_view::npos && !frac_part.empty() && !all_digits(frac_part)) return s;

    while (int_part.size() > 1 && int_part.front() == '0') int_part.remove_prefix(1);
    while (!frac_part.empty() && frac_part.back() == '0') frac_part.remove_suffix(1);

    std::string out(int_part);
    if (!frac_part.empty()) out += "." + std::string(frac_part);
    if (negative && out != "0") out.insert(out.begin(), '-');
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<std::string> boxed_content(std::string_view text) {
    static constexpr std::string_view kOpen = "\\boxed{";
    const auto start = text.find(kOpen);
    if (start == std::string_view::npos) return std::nullopt;
    std::size_t depth = 1;
    for (std::size_t i = start + kOpen.size(); i < text.size(); ++i) {
        if (text[i] == '{') ++depth;
        if (text[i] == '}' && --depth == 0) return std::string(text.substr(start + kOpen.size(), i - start - kOpen.size()));
    }
    return std::nullopt;
}

std::optional<std::string> final_line_content(std::string_view text) {
    std::string_view last;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (std::any_of(line.begin(), line.end(), [](char c) { return !is_space(c); })) last = line;
        pos = nl + 1;
    }
    if (last.empty()) return std::nullopt;
    const std::string low = lower(last);
    const auto marker = low.rfind("answer:");
    if (marker != std::string::npos) last.remove_prefix(marker + 7);
    return std::string(last);
}

} // namespace

std::string normalize_answer(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return canonical_number(out);
}

CanonicalAnswer canonical(std::string_view text) { return CanonicalAnswer{normalize_answer(text)}; }

ExtractionRule ExtractionRule::boxed_math() { return ExtractionRule(Kind::BoxedMath); }

ExtractionRule ExtractionRule::final_line() { return ExtractionRule(Kind::FinalLine); }

ExtractionRule ExtractionRule::regex(const std::string &pattern) {
    ExtractionRule rule(Kind::Regex);
    rule.pattern_ = pattern;
    try {
        rule.regex_ = std::make_shared<const std::regex>(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error &e) {
        throw ConfigError("extract", "invalid regex '" + pattern + "': " + e.what());
    }
    return rule;
}

ExtractionRule ExtractionRule::parse(std::string_view spec) {
    if (spec == "boxed" || spec == "boxed-math") return boxed_math();
    if (spec == "final-line") return final_line();
    if (spec.rfind("regex:", 0) == 0) return regex(std::string(spec.substr(6)));
    throw ConfigError("extract", "unknown extraction rule '" + std::string(spec) + "' (boxed|final-line|regex:<re>)");
}

std::optional<CanonicalAnswer> ExtractionRule::extract(std::string_view text) const {
    std::optional<std::string> raw;
    switch (kind_) {
    case Kind::BoxedMath: raw = boxed_content(text); break;
    case Kind::FinalLine: raw = final_line_content(text); break;
    case Kind::Regex: {
        std::match_results<std::string_view::const_iterator> m;
        if (std::regex_search(text.begin(), text.end(), m, *regex_)) {
            raw = m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
        }
        break;
    }
    }
    if (!raw) return std::nullopt;
    CanonicalAnswer answer = canonical(*raw);
    if (answer.text.empty()) return std::nullopt;
    return answer;
}

std::optional<CanonicalAnswer> extract_answer(std::string_view text, const ExtractionRule &rule) {
    return rule.extract(text);
}

std::optional<CanonicalAnswer> majority_vote(std::span<const std::optional<CanonicalAnswer>> answers) {
    // (answer, count) in first-occurrence order.
    std::vector<std::pair<CanonicalAnswer, std::size_t>> tally;
    for (const auto &a : answers) {
        if (!a) continue;
        auto it = std::find_if(tally.begin(), tally.end(), [&](const auto &entry) { return entry.first == *a; });
        if (it == tally.end()) {
            tally.emplace_back(*a, 1);
        } else {
            ++it->second;
        }
    }
    if (tally.empty()) return std::nullopt;
    auto best = tally.begin();
    for (auto it = tally.begin(); it != tally.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

double pass_at_k(std::uint64_t n, std::uint64_t c, std::uint64_t k) {
    if (c > n) throw InvariantError("pass@k requires c <= n");
    if (k < 1 || k > n) throw InvariantError("pass@k requires 1 <= k <= n");
    if (n - c < k) return 1.0;
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
    double miss = 1.0;
    for (std::uint64_t i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    return 1.0 - miss;
}

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

GoldAnswers load_gold(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open gold file");
    GoldAnswers gold;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), is_space)) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error &e) {
            throw ConfigError(where, e.what());
        }
        const auto id = json_detail::as_string(json_detail::require(j, "id", where), where + ".id");
        const auto answer = json_detail::as_string(json_detail::require(j, "answer", where), where + ".answer");
        if (!gold.emplace(id, answer).second) throw ConfigError(where, "duplicate id '" + id + "'");
    }
    return gold;
}

namespace {

struct Stats {
    std::size_t count = 0;
    double sum = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x) {
        ++count;
        sum += x;
        min = std::min(min, x);
        max = std::max(max, x);
    }

    Json to_json() const {
        if (count == 0) return Json{{"count", 0}, {"mean", nullptr}, {"min", nullptr}, {"max", nullptr}};
        return Json{{"count", count}, {"mean", round4(sum / static_cast<double>(count))}, {"min", min}, {"max", max}};
    }
};

using GroupKey = std::tuple<std::string, std::uint32_t, std::uint32_t, std::string, std::string, bool>;

GroupKey key_of(const DecodeRecord &r) { return {r.strategy, r.K, r.N, r.merge_mode, r.pipeline, r.trim_suffix}; }

// Candidate answers one question contributes to voting and pass@k.
std::vector<std::string> candidates(const DecodeRecord &r) {
    if (!r.trace_answers.empty()) return r.trace_answers;
    return {r.answer_text};
}

Json score(std::span<const DecodeRecord *const> records, const SummaryOptions &opt) {
    Stats answer_len, reasoning_len, thinking_steps, merge_start;
    std::size_t valid = 0, forced = 0;
    for (const auto *r : records) {
        if (r->valid) ++valid;
        answer_len.add(static_cast<double>(r->answer.size()));
        thinking_steps.add(static_cast<double>(r->thinking_steps));
        if (r->merge_start_step) merge_start.add(static_cast<double>(*r->merge_start_step));
        for (const auto &t : r->traces) {
            if (t.selected && t.reasoning_length) reasoning_len.add(static_cast<double>(*t.reasoning_length));
            if (t.forced) ++forced;
        }
    }
    Json out{{"records", records.size()},
             {"valid", valid},
             {"answer_length", answer_len.to_json()},
             {"selected_reasoning_length", reasoning_len.to_json()},
             {"thinking_steps", thinking_steps.to_json()},
             {"merge_start_step", merge_start.to_json()},
             {"forced_traces", forced}};
    if (!opt.gold) return out;

    // Ensemble accuracy is per record; voting and pass@k pool all records of
    // a question.
    std::size_t scored = 0, correct = 0;
    std::map<std::string, std::vector<std::string>> by_question;
    for (const auto *r : records) {
        auto gold = opt.gold->find(r->id);
        if (gold == opt.gold->end()) continue;
        ++scored;
        const auto got = opt.rule.extract(r->answer_text);
        if (got && *got == canonical(gold->second)) ++correct;
        auto c = candidates(*r);
        auto &bucket = by_question[r->id];
        bucket.insert(bucket.end(), c.begin(), c.end());
    }
    std::size_t mv_correct = 0, pass_questions = 0, short_questions = 0;
    double pass_sum = 0.0;
    for (const auto &[id, answers] : by_question) {
        const CanonicalAnswer gold = canonical(opt.gold->at(id));
        std::vector<std::optional<CanonicalAnswer>> votes;
        std::uint64_t hits = 0;
        for (const auto &a : answers) {
            votes.push_back(opt.rule.extract(a));
            if (votes.back() && *votes.back() == gold) ++hits;
        }
        const auto winner = majority_vote(votes);
        if (winner && *winner == gold) ++mv_correct;
        if (answers.size() >= opt.k) {
            pass_sum += pass_at_k(answers.size(), hits, opt.k);
            ++pass_questions;
        } else {
            ++short_questions;
        }
    }
    const auto ratio = [](double num, std::size_t den) { return den ? Json(round4(num / static_cast<double>(den))) : Json(nullptr); };
    out["questions"] = by_question.size();
    out["ensemble_accuracy"] = ratio(static_cast<double>(correct), scored);
    out["mv_accuracy"] = ratio(static_cast<double>(mv_correct), by_question.size());
    out["pass_at_k"] = ratio(pass_sum, pass_questions);
    out["k"] = opt.k;
    out["questions_below_k"] = short_questions;
    return out;
}

} // namespace

Json summarize(std::span<const DecodeRecord> records, const SummaryOptions &options) {
    if (!records.empty()) {
        const int version = records.front().schema_version;
        for (const auto &r : records) {
            if (r.schema_version != version) {
                throw ConfigError("schema_version", "records mix schema versions " + std::to_string(version) + " and " +
                                                        std::to_string(r.schema_version));
            }
        }
    }
    std::map<GroupKey, std::vector<const DecodeRecord *>> groups;
    std::vector<const DecodeRecord *> all;
    for (const auto &r : records) {
        groups[key_of(r)].push_back(&r);
        all.push_back(&r);
    }
    Json groups_j = Json::array();
    for (const auto &[key, members] : groups) {
        Json g = score(members, options);
        g["strategy"] = std::get<0>(key);
        g["K"] = std::get<1>(key);
        g["N"] = std::get<2>(key);
        g["merge_mode"] = std::get<3>(key);
        g["pipeline"] = std::get<4>(key);
        g["trim_suffix"] = std::get<5>(key);
        groups_j.push_back(std::move(g));
    }
    return Json{{"overall", score(all, options)}, {"groups", std::move(groups_j)}};
}

} // namespace tracemerge
