#pragma once

// Canonical JSON encodings. Field names are snake_case and match the value
// types one to one; parsing validates the same invariants as construction and
// reports the offending field path through ConfigError.

#include "tracemerge/core.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>

namespace tracemerge {

using Json = nlohmann::json;

Json to_json(const Vocabulary &vocab);
Json to_json(const Trace &trace);
Json to_json(const EnsembleSession &session);
Json to_json(const SamplingPolicy &policy);
Json to_json(const StrategyConfig &config);
Json to_json(const StopRule &rule);

Vocabulary vocabulary_from_json(const Json &j, const std::string &path = "");
Trace trace_from_json(const Json &j, std::span<const TokenId> delimiter, const std::string &path = "");
EnsembleSession session_from_json(const Json &j, std::span<const TokenId> delimiter, const std::string &path = "");
SamplingPolicy sampling_policy_from_json(const Json &j, const std::string &path = "");
StrategyConfig strategy_config_from_json(const Json &j, const std::string &path = "");
StopRule stop_rule_from_json(const Json &j, const std::string &path = "");

Tokens tokens_from_json(const Json &j, const std::string &path = "");

namespace json_detail {

std::string join(const std::string &path, const std::string &key);
const Json &require(const Json &j, const std::string &key, const std::string &path);
void require_object(const Json &j, const std::string &path);
std::uint64_t as_uint(const Json &j, const std::string &path, std::uint64_t max = UINT64_MAX);
double as_real(const Json &j, const std::string &path);
bool as_bool(const Json &j, const std::string &path);
std::string as_string(const Json &j, const std::string &path);

} // namespace json_detail

} // namespace tracemerge
