#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "sew/backend.hpp"
#include "sew/errors.hpp"

namespace sew {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::Config, "endpoint must be an absolute URL: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool transient(int status) {
    return status == 408 || status == 409 || status == 429 || status >= 500;
}

}  // namespace

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
        throw Error(ErrorCode::Config, "environment variable " + config_.api_key_env + " is not set");
    }
    api_key_ = key;
    split_url(config_.endpoint);
}

CompletionBackend::Answer LiveBackend::answer(const CompletionRequest& request) {
    const auto [base, path] = split_url(config_.endpoint);
    json body{{"model", request.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    if (request.seed) {
        body["seed"] = *request.seed;
    }
    const std::string payload = body.dump();

    httplib::Client client(base);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_bearer_token_auth(api_key_);

    std::string last_error;
    bool quota = false;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms * (1LL << (attempt - 1))));
        }
        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path, payload, "application/json");
        const auto latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            CompletionResponse out;
            try {
                const json reply = json::parse(res->body);
                out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
                if (reply.contains("usage")) {
                    out.input_tokens = reply["usage"].value("prompt_tokens", std::int64_t{0});
                    out.output_tokens = reply["usage"].value("completion_tokens", std::int64_t{0});
                } else {
                    out.input_tokens = estimate_tokens(request.prompt);
                    out.output_tokens = estimate_tokens(out.text);
                }
            } catch (const json::exception& e) {
                throw Error(ErrorCode::MalformedResponse, e.what());
            }
            out.latency_ms = latency;
            return {std::move(out), attempt, std::nullopt};
        }
        quota = res->status == 429;
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
        if (res->status == 401 || res->status == 403) {
            throw Error(ErrorCode::Quota, last_error);
        }
        if (!transient(res->status)) {
            throw Error(ErrorCode::MalformedResponse, last_error);
        }
    }
    throw Error(quota ? ErrorCode::Quota : ErrorCode::Network,
                last_error + " (after " + std::to_string(config_.retry_budget) + " retries)");
}

}  // namespace sew
