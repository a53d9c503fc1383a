#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sew {

using CallId = std::int64_t;

struct CompletionRequest {
    std::string prompt;
    std::string model = "gpt-4o-mini";
    double temperature = 1.0;
    int max_tokens = 2048;
    std::optional<std::int64_t> seed;

    bool operator==(const CompletionRequest&) const = default;
};

struct CompletionResponse {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t latency_ms = 0;

    bool operator==(const CompletionResponse&) const = default;
};

struct TranscriptRecord {
    CallId call_id = 0;
    std::string role_tag;
    CompletionRequest request;
    CompletionResponse response;
    std::string timestamp;  // ISO-8601 UTC
    int retries = 0;
};

struct TokenTotals {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t total = 0;
    std::map<std::string, TokenTotals> by_role;

    bool operator==(const TokenTotals&) const = default;
};

TokenTotals transcript_totals(const std::vector<TranscriptRecord>& records);

/// Local token estimate for providers that report none: ceil(bytes / 4).
std::int64_t estimate_tokens(std::string_view text);

/// Canonical JSON of the request fields that identify a replayable call.
std::string request_key(const CompletionRequest& request);

nlohmann::json to_json(const CompletionRequest& request);
nlohmann::json to_json(const TranscriptRecord& record);
CompletionRequest request_from_json(const nlohmann::json& j);
TranscriptRecord record_from_json(const nlohmann::json& j);

/// JSON Lines transcript I/O.
std::vector<TranscriptRecord> read_transcript(const std::string& path);
void write_transcript(const std::string& path, const std::vector<TranscriptRecord>& records);

/// Thread-safe, append-only call log.
class Transcript {
public:
    CallId append(std::string role_tag, CompletionRequest request, CompletionResponse response,
                  std::string timestamp, int retries);
    std::vector<TranscriptRecord> records() const;
    std::vector<TranscriptRecord> records_since(CallId after) const;
    CallId last_call_id() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptRecord> records_;
};

struct Completion {
    CompletionResponse response;
    CallId call_id;
};

/// Text-completion interface. Every call to complete() appends exactly one
/// transcript record.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    Completion complete(const CompletionRequest& request, std::string_view role_tag);

    const Transcript& transcript() const { return transcript_; }

protected:
    struct Answer {
        CompletionResponse response;
        int retries = 0;
        std::optional<std::string> timestamp;  // overrides the wall clock (replay)
    };

    virtual Answer answer(const CompletionRequest& request) = 0;

private:
    Transcript transcript_;
};

/// Returns the prompt unchanged.
class EchoBackend final : public CompletionBackend {
protected:
    Answer answer(const CompletionRequest& request) override;
};

/// Applies a user-supplied deterministic function.
class ScriptedBackend final : public CompletionBackend {
public:
    using TextFn = std::function<std::string(const CompletionRequest&)>;
    using ResponseFn = std::function<CompletionResponse(const CompletionRequest&)>;

    explicit ScriptedBackend(TextFn fn);
    explicit ScriptedBackend(ResponseFn fn);

    /// Builds a backend from a rule table:
    /// {"rules": [{"contains": "...", "seed_mod": [m, r], "response": "..."}],
    ///  "default": "echo" | {"response": "..."}}
    /// First matching rule wins; without a match the default applies.
    static std::unique_ptr<ScriptedBackend> from_rules(const nlohmann::json& table);

protected:
    Answer answer(const CompletionRequest& request) override;

private:
    ResponseFn fn_;
};

/// Answers from a recorded transcript, matching on request content.
/// Repeated identical requests receive the recorded responses in recorded
/// order; once exhausted, the last one is reused.
class ReplayBackend final : public CompletionBackend {
public:
    explicit ReplayBackend(const std::vector<TranscriptRecord>& recorded);

protected:
    Answer answer(const CompletionRequest& request) override;

private:
    struct Entry {
        std::vector<TranscriptRecord> records;
        std::size_t served = 0;
    };
    std::mutex mutex_;
    std::map<std::string, Entry> table_;
};

struct LiveBackendConfig {
    std::string endpoint;          // full chat-completions URL
    std::string api_key_env = "SEW_API_KEY";
    int retry_budget = 3;
    int timeout_seconds = 120;
    int backoff_ms = 1000;
};

/// OpenAI-compatible chat-completions client.
class LiveBackend final : public CompletionBackend {
public:
    explicit LiveBackend(LiveBackendConfig config);

protected:
    Answer answer(const CompletionRequest& request) override;

private:
    LiveBackendConfig config_;
    std::string api_key_;
};

std::string utc_now_iso8601();

}  // namespace sew
