#pragma once

// JSON wire protocol between the engine and a remote logits server.
//
//   GET  /v1/meta   -> {"vocab_size", "eos_id", "pad_id", "supports_mask", "max_context", "model"}
//   POST /v1/logits {"contexts": [[id,...],...], "mask"?: [[bool,...],...], "top"?: int}
//                   -> {"logits": [[x,...],...]}                      (dense)
//                   -> {"sparse": [{"ids", "values", "fill"},...]}    (when "top" is set)
//   errors          -> {"error": {"kind": "bad_request"|"overloaded"|"internal", "detail"}}
//                      with status 400 / 503 / 500
//
// Logit numbers are the shortest decimals that round-trip the float32 value.

#include "tracemerge/backend.hpp"
#include "tracemerge/codec.hpp"

#include <optional>
#include <string>

namespace tracemerge::wire {

enum class ErrorKind { BadRequest, Overloaded, Internal };

int http_status(ErrorKind kind) noexcept;
std::string_view to_string(ErrorKind kind) noexcept;

struct LogitsRequest {
    std::vector<Tokens> contexts;
    std::optional<std::vector<std::vector<bool>>> mask;
    std::optional<std::uint32_t> top;
};

Json encode_meta(const BackendDescriptor &desc);
/// Throws ContractError on schema violations.
BackendDescriptor decode_meta(const Json &j);

std::string encode_logits_request(const LogitsRequest &request);
/// Throws ContractError on schema violations.
LogitsRequest decode_logits_request(const Json &j);

/// Dense when `top` is unset, otherwise each row keeps its `top` largest
/// entries (ties to the lower id) and fill = smallest kept value - 10.
std::string encode_logits_response(std::span<const LogitVector> rows, std::optional<std::uint32_t> top = std::nullopt);

/// Parses a response body (numbers read straight into float32) and inflates
/// sparse rows with their fill value. Throws ContractError when the body is
/// malformed or has the wrong row count or width.
std::vector<LogitVector> decode_logits_response(std::string_view body, std::uint32_t vocab_size,
                                                std::size_t expected_rows);

std::string encode_error(ErrorKind kind, const std::string &detail);

/// Shortest round-trip decimal of a float32.
std::string format_float(float x);

} // namespace tracemerge::wire
