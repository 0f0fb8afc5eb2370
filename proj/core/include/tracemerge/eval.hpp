#pragma once

#include "tracemerge/codec.hpp"
#include "tracemerge/record.hpp"

#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracemerge {

/// A normalized answer string; equality is exact match.
struct CanonicalAnswer {
    std::string text;

    friend bool operator==(const CanonicalAnswer &, const CanonicalAnswer &) = default;
    friend auto operator<=>(const CanonicalAnswer &, const CanonicalAnswer &) = default;
};

/// Trims, lowercases ASCII, collapses internal whitespace to one space.
/// A purely numeric result ([+-]digits[.digits]) loses its leading zeros,
/// trailing fractional zeros, a bare trailing '.', a '+' sign and the sign
/// of zero. Idempotent.
std::string normalize_answer(std::string_view text);

CanonicalAnswer canonical(std::string_view text);

class ExtractionRule {
public:
    enum class Kind { BoxedMath, FinalLine, Regex };

    static ExtractionRule boxed_math();
    static ExtractionRule final_line();
    /// Throws ConfigError for an invalid pattern. Capture group 1 is used
    /// when present, otherwise the whole match.
    static ExtractionRule regex(const std::string &pattern);
    /// "boxed", "final-line" or "regex:<pattern>".
    static ExtractionRule parse(std::string_view spec);

    Kind kind() const noexcept { return kind_; }
    const std::string &pattern() const noexcept { return pattern_; }

    std::optional<CanonicalAnswer> extract(std::string_view text) const;

private:
    explicit ExtractionRule(Kind kind) : kind_(kind) {}

    Kind kind_;
    std::string pattern_;
    std::shared_ptr<const std::regex> regex_;
};

/// First match under `rule`, normalized; nullopt when nothing matches or the
/// match normalizes to the empty string.
///   boxed-math: balanced content of the first \boxed{...}
///   final-line: last non-empty line, after its last "answer:" (any case)
std::optional<CanonicalAnswer> extract_answer(std::string_view text, const ExtractionRule &rule);

/// Most frequent answer, ignoring nullopt; ties go to the answer seen first.
std::optional<CanonicalAnswer> majority_vote(std::span<const std::optional<CanonicalAnswer>> answers);

/// Unbiased pass@k estimate 1 - C(n-c, k) / C(n, k) as a running product,
/// so no binomial is ever formed. Requires 0 <= c <= n and 1 <= k <= n.
double pass_at_k(std::uint64_t n, std::uint64_t c, std::uint64_t k);

/// Rounds to 4 decimals for reports.
double round4(double x);

using GoldAnswers = std::map<std::string, std::string>;

/// Reads JSONL of {"id", "answer"}.
GoldAnswers load_gold(const std::string &path);

struct SummaryOptions {
    const GoldAnswers *gold = nullptr;
    ExtractionRule rule = ExtractionRule::final_line();
    std::uint64_t k = 1;
};

/// Grouped statistics over records, groups keyed by strategy, K, N,
/// merge_mode, pipeline and trim_suffix in lexicographic order. With gold
/// answers each group also carries ensemble accuracy, majority-vote accuracy
/// and pass@k. Throws ConfigError on mixed schema versions.
Json summarize(std::span<const DecodeRecord> records, const SummaryOptions &options = {});

} // namespace tracemerge
