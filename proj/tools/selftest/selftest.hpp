#pragma once

// Conformance suites shipped with the CLI. Each suite checks an engine
// property against a small self-contained reference.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tracemerge::selftest {

struct SuiteResult {
    std::string name;
    bool passed = true;
    std::size_t cases = 0;
    /// First failing case, empty on success.
    std::string detail;
    double seconds = 0.0;
};

struct Options {
    /// Multiplies each suite's default case count.
    double scale = 1.0;
    std::uint64_t seed = 20261019;
};

/// Suite names in run order.
const std::vector<std::string> &suite_names();

/// Throws std::invalid_argument for an unknown name.
SuiteResult run_suite(std::string_view name, const Options &options = {});

/// Runs `only` or every suite, printing one line per suite to `out`.
/// Returns true when all ran suites pass.
bool run_all(std::ostream &out, const std::optional<std::string> &only = std::nullopt, const Options &options = {});

/// Default case counts.
inline constexpr std::size_t kMergeSets = 1000;
inline constexpr std::size_t kSamplerCases = 10000;
inline constexpr unsigned kEstimatorMaxN = 12;
inline constexpr std::size_t kTrimSequences = 500;
inline constexpr std::size_t kStrategyPools = 500;
inline constexpr std::size_t kPipelineCases = 100;
inline constexpr std::size_t kMaskPools = 200;
inline constexpr std::size_t kK1Configs = 50;
inline constexpr std::size_t kCollapseCases = 30;

} // namespace tracemerge::selftest
