#include "tracemerge/wire.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <cmath>
#include <numeric>

namespace tracemerge::wire {

int http_status(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::BadRequest: return 400;
    case ErrorKind::Overloaded: return 503;
    case ErrorKind::Internal: return 500;
    }
    return 500;
}

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::BadRequest: return "bad_request";
    case ErrorKind::Overloaded: return "overloaded";
    case ErrorKind::Internal: return "internal";
    }
    return "internal";
}

namespace {

template <typename F>
auto schema(F &&f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError &e) {
        throw ContractError(std::string("wire schema violation: ") + e.what());
    } catch (const Json::exception &e) {
        throw ContractError(std::string("wire schema violation: ") + e.what());
    }
}

} // namespace

Json encode_meta(const BackendDescriptor &desc) {
    return Json{{"vocab_size", desc.vocab_size}, {"eos_id", desc.eos_id},         {"pad_id", desc.pad_id},
                {"supports_mask", desc.supports_mask}, {"max_context", desc.max_context}, {"model", desc.model}};
}

BackendDescriptor decode_meta(const Json &j) {
    using namespace json_detail;
    return schema([&] {
        BackendDescriptor d;
        d.vocab_size = static_cast<std::uint32_t>(as_uint(require(j, "vocab_size", ""), "vocab_size", kMaxVocabSize));
        d.eos_id = static_cast<TokenId>(as_uint(require(j, "eos_id", ""), "eos_id", UINT32_MAX));
        d.pad_id = static_cast<TokenId>(as_uint(require(j, "pad_id", ""), "pad_id", UINT32_MAX));
        d.supports_mask = as_bool(require(j, "supports_mask", ""), "supports_mask");
        d.max_context = static_cast<std::uint32_t>(as_uint(require(j, "max_context", ""), "max_context", UINT32_MAX));
        d.model = as_string(require(j, "model", ""), "model");
        if (d.vocab_size == 0) throw ConfigError("vocab_size", "must be positive");
        return d;
    });
}

std::string encode_logits_request(const LogitsRequest &request) {
    Json j{{"contexts", request.contexts}};
    if (request.mask) {
        Json mask = Json::array();
        for (const auto &row : *request.mask) {
            Json r = Json::array();
            for (bool b : row) r.push_back(b);
            mask.push_back(std::move(r));
        }
        j["mask"] = std::move(mask);
    }
    if (request.top) j["top"] = *request.top;
    return j.dump();
}

LogitsRequest decode_logits_request(const Json &j) {
    using namespace json_detail;
    return schema([&] {
        LogitsRequest r;
        const Json &contexts = require(j, "contexts", "");
        if (!contexts.is_array()) throw ConfigError("contexts", "expected an array");
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            r.contexts.push_back(tokens_from_json(contexts[i], "contexts[" + std::to_string(i) + "]"));
        }
        if (j.contains("mask") && !j["mask"].is_null()) {
            const Json &mask = j["mask"];
            if (!mask.is_array() || mask.size() != r.contexts.size()) {
                throw ConfigError("mask", "expected one row per context");
            }
            std::vector<std::vector<bool>> rows;
            for (std::size_t i = 0; i < mask.size(); ++i) {
                const std::string path = "mask[" + std::to_string(i) + "]";
                if (!mask[i].is_array()) throw ConfigError(path, "expected an array of booleans");
                std::vector<bool> row;
                for (std::size_t c = 0; c < mask[i].size(); ++c) row.push_back(as_bool(mask[i][c], path));
                rows.push_back(std::move(row));
            }
            r.mask = std::move(rows);
        }
        if (j.contains("top") && !j["top"].is_null()) {
            r.top = static_cast<std::uint32_t>(as_uint(j["top"], "top", UINT32_MAX));
            if (*r.top == 0) throw ConfigError("top", "must be positive");
        }
        return r;
    });
}

std::string format_float(float x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

void append_float_array(std::string &out, std::span<const float> values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_float(values[i]);
    }
    out += ']';
}

} // namespace

std::string encode_logits_response(std::span<const LogitVector> rows, std::optional<std::uint32_t> top) {
    std::string out;
    if (!top) {
        out = "{\"logits\":[";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (k) out += ',';
            append_float_array(out, rows[k].values);
        }
        out += "]}";
        return out;
    }

    out = "{\"sparse\":[";
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto &values = rows[k].values;
        std::vector<std::uint32_t> ids(values.size());
        std::iota(ids.begin(), ids.end(), 0u);
        const std::size_t keep = std::min<std::size_t>(*top, ids.size());
        std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                          [&](std::uint32_t a, std::uint32_t b) {
                              return values[a] > values[b] || (values[a] == values[b] && a < b);
                          });
        ids.resize(keep);
        std::sort(ids.begin(), ids.end());
        std::vector<float> kept;
        float lowest = values.empty() ? 0.0f : values[ids.front()];
        for (auto id : ids) {
            kept.push_back(values[id]);
            lowest = std::min(lowest, values[id]);
        }
        if (k) out += ',';
        out += "{\"ids\":";
        out += Json(ids).dump();
        out += ",\"values\":";
        append_float_array(out, kept);
        out += ",\"fill\":";
        out += format_float(lowest - 10.0f);
        out += '}';
    }
    out += "]}";
    return out;
}

namespace {

// Numbers land directly in float32, so shortest float decimals round-trip
// without passing through double.
using FloatJson = nlohmann::basic_json<std::map, std::vector, std::string, bool, std::int64_t, std::uint64_t, float>;

[[noreturn]] void bad_response(const std::string &path, const std::string &what) {
    throw ContractError("wire schema violation: " + (path.empty() ? what : path + ": " + what));
}

float read_float(const FloatJson &j, const std::string &path) {
    if (!j.is_number()) bad_response(path, "expected a number");
    const float x = j.get<float>();
    if (!std::isfinite(x)) bad_response(path, "non-finite logit");
    return x;
}

std::vector<float> read_floats(const FloatJson &j, const std::string &path) {
    if (!j.is_array()) bad_response(path, "expected an array of numbers");
    std::vector<float> out;
    out.reserve(j.size());
    for (const auto &x : j) out.push_back(read_float(x, path));
    return out;
}

} // namespace

std::vector<LogitVector> decode_logits_response(std::string_view body, std::uint32_t vocab_size,
                                                std::size_t expected_rows) {
    FloatJson j;
    try {
        j = FloatJson::parse(body);
    } catch (const FloatJson::exception &e) {
        bad_response("", e.what());
    }
    if (!j.is_object()) bad_response("", "expected an object");

    std::vector<LogitVector> out;
    if (j.contains("logits")) {
        const auto &rows = j["logits"];
        if (!rows.is_array()) bad_response("logits", "expected an array");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::string path = "logits[" + std::to_string(k) + "]";
            LogitVector v{read_floats(rows[k], path)};
            if (v.size() != vocab_size) bad_response(path, "expected " + std::to_string(vocab_size) + " numbers");
            out.push_back(std::move(v));
        }
    } else if (j.contains("sparse")) {
        const auto &rows = j["sparse"];
        if (!rows.is_array()) bad_response("sparse", "expected an array");
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const std::string path = "sparse[" + std::to_string(k) + "]";
            const auto &row = rows[k];
            if (!row.is_object() || !row.contains("ids") || !row.contains("values") || !row.contains("fill")) {
                bad_response(path, "expected {ids, values, fill}");
            }
            const auto &ids = row["ids"];
            const auto values = read_floats(row["values"], path + ".values");
            const float fill = read_float(row["fill"], path + ".fill");
            if (!ids.is_array() || ids.size() != values.size()) bad_response(path, "expected one value per id");
            LogitVector v{std::vector<float>(vocab_size, fill)};
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (!ids[i].is_number_unsigned() && !(ids[i].is_number_integer() && ids[i].get<std::int64_t>() >= 0)) {
                    bad_response(path + ".ids", "expected non-negative integers");
                }
                const auto id = ids[i].get<std::uint64_t>();
                if (id >= vocab_size) bad_response(path + ".ids", "id " + std::to_string(id) + " out of range");
                v.values[id] = values[i];
            }
            out.push_back(std::move(v));
        }
    } else {
        bad_response("", "response holds neither \"logits\" nor \"sparse\"");
    }
    if (out.size() != expected_rows) {
        bad_response("", "expected " + std::to_string(expected_rows) + " rows, got " + std::to_string(out.size()));
    }
    return out;
}

std::string encode_error(ErrorKind kind, const std::string &detail) {
    return Json{{"error", {{"kind", std::string(to_string(kind))}, {"detail", detail}}}}.dump();
}

} // namespace tracemerge::wire
