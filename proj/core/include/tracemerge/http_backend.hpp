#pragma once

#include "tracemerge/backend.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tracemerge {

struct HttpBackendOptions {
    /// Base URL such as "http://127.0.0.1:8000".
    std::string endpoint;
    /// Ask the server for sparse rows of this many entries.
    std::optional<std::uint32_t> top;
    /// Bound on concurrent requests to the endpoint.
    unsigned max_in_flight = 8;
    /// Waits between attempts on transport-class failures; the request is
    /// tried once plus once per entry.
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(100), std::chrono::milliseconds(200),
                                                   std::chrono::milliseconds(400)};
    std::chrono::seconds timeout{60};
};

/// Logits over the JSON wire protocol (see wire.hpp). The descriptor is
/// fetched once at construction.
class HttpBackend final : public Backend {
public:
    /// Throws ContractError when `expected` disagrees with the served meta.
    explicit HttpBackend(HttpBackendOptions options, const Vocabulary *expected = nullptr);
    ~HttpBackend() override;

    const BackendDescriptor &descriptor() const noexcept override { return descriptor_; }

    /// Number of HTTP attempts made so far, retries included.
    std::size_t attempts() const noexcept;

protected:
    std::vector<LogitVector> compute(std::span<const Tokens> contexts) override;
    std::vector<LogitVector> compute_masked(const PaddedBatch &batch) override;

private:
    struct State;

    std::string send(const std::string &method, const std::string &path, const std::string &body);

    HttpBackendOptions options_;
    std::unique_ptr<State> state_;
    BackendDescriptor descriptor_;
};

} // namespace tracemerge
