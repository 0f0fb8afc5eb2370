#include "tracemerge/http_backend.hpp"

#include "tracemerge/wire.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace tracemerge {

struct HttpBackend::State {
    std::mutex mu;
    std::condition_variable cv;
    unsigned in_flight = 0;
    std::atomic<std::size_t> attempts{0};
};

namespace {

class Slot {
public:
    Slot(std::mutex &mu, std::condition_variable &cv, unsigned &in_flight, unsigned limit)
        : mu_(mu), cv_(cv), in_flight_(in_flight) {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < limit; });
        ++in_flight_;
    }
    ~Slot() {
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }
    Slot(const Slot &) = delete;
    Slot &operator=(const Slot &) = delete;

private:
    std::mutex &mu_;
    std::condition_variable &cv_;
    unsigned &in_flight_;
};

std::string error_detail(const httplib::Result &res) {
    try {
        auto j = Json::parse(res->body);
        if (j.contains("error")) {
            const auto &e = j["error"];
            return e.value("kind", std::string("?")) + ": " + e.value("detail", std::string());
        }
    } catch (const Json::exception &) {
    }
    return "HTTP " + std::to_string(res->status);
}

} // namespace

HttpBackend::HttpBackend(HttpBackendOptions options, const Vocabulary *expected)
    : options_(std::move(options)), state_(std::make_unique<State>()) {
    if (options_.endpoint.empty()) throw ContractError("http backend needs an endpoint");
    if (options_.max_in_flight == 0) options_.max_in_flight = 1;
    const std::string body = send("GET", "/v1/meta", "");
    try {
        descriptor_ = wire::decode_meta(Json::parse(body));
    } catch (const Json::parse_error &e) {
        throw ContractError(std::string("malformed /v1/meta response: ") + e.what());
    }
    if (expected) descriptor_.check_compatible(*expected);
}

HttpBackend::~HttpBackend() = default;

std::size_t HttpBackend::attempts() const noexcept { return state_->attempts.load(); }

std::string HttpBackend::send(const std::string &method, const std::string &path, const std::string &body) {
    Slot slot(state_->mu, state_->cv, state_->in_flight, options_.max_in_flight);
    std::string last_error;
    for (std::size_t attempt = 0;; ++attempt) {
        state_->attempts.fetch_add(1);
        httplib::Client client(options_.endpoint);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);
        auto res = method == "GET" ? client.Get(path) : client.Post(path, body, "application/json");

        bool retryable = false;
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status == 200) {
            return res->body;
        } else if (res->status == 503) {
            last_error = "server overloaded: " + error_detail(res);
            retryable = true;
        } else {
            throw ContractError(options_.endpoint + path + " failed: " + error_detail(res));
        }

        if (!retryable || attempt >= options_.backoff.size()) break;
        std::this_thread::sleep_for(options_.backoff[attempt]);
    }
    throw TransportError(options_.endpoint + path + " failed after " + std::to_string(options_.backoff.size() + 1) +
                         " attempts: " + last_error);
}

std::vector<LogitVector> HttpBackend::compute(std::span<const Tokens> contexts) {
    wire::LogitsRequest request;
    request.contexts.assign(contexts.begin(), contexts.end());
    request.top = options_.top;
    const std::string body = send("POST", "/v1/logits", wire::encode_logits_request(request));
    return wire::decode_logits_response(body, descriptor_.vocab_size, contexts.size());
}

std::vector<LogitVector> HttpBackend::compute_masked(const PaddedBatch &batch) {
    wire::LogitsRequest request;
    request.contexts = batch.rows();
    request.mask = batch.mask();
    request.top = options_.top;
    const std::string body = send("POST", "/v1/logits", wire::encode_logits_request(request));
    return wire::decode_logits_response(body, descriptor_.vocab_size, batch.size());
}

} // namespace tracemerge
