#include "sew/backend.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "sew/errors.hpp"

namespace sew {

using nlohmann::json;

std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

TokenTotals transcript_totals(const std::vector<TranscriptRecord>& records) {
    TokenTotals totals;
    for (const auto& r : records) {
        totals.input_tokens += r.response.input_tokens;
        totals.output_tokens += r.response.output_tokens;
        auto& group = totals.by_role[r.role_tag];
        group.input_tokens += r.response.input_tokens;
        group.output_tokens += r.response.output_tokens;
        group.total = group.input_tokens + group.output_tokens;
    }
    totals.total = totals.input_tokens + totals.output_tokens;
    return totals;
}

json to_json(const CompletionRequest& request) {
    json j{{"prompt", request.prompt},
           {"model", request.model},
           {"temperature", request.temperature},
           {"max_tokens", request.max_tokens}};
    j["seed"] = request.seed ? json(*request.seed) : json(nullptr);
    return j;
}

std::string request_key(const CompletionRequest& request) {
    return to_json(request).dump();
}

json to_json(const TranscriptRecord& record) {
    return json{{"call_id", record.call_id},
                {"role_tag", record.role_tag},
                {"request", to_json(record.request)},
                {"response",
                 {{"text", record.response.text},
                  {"input_tokens", record.response.input_tokens},
                  {"output_tokens", record.response.output_tokens},
                  {"latency_ms", record.response.latency_ms}}},
                {"timestamp", record.timestamp},
                {"retries", record.retries}};
}

CompletionRequest request_from_json(const json& j) {
    CompletionRequest r;
    r.prompt = j.at("prompt").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("seed") && !j.at("seed").is_null()) {
        r.seed = j.at("seed").get<std::int64_t>();
    }
    return r;
}

TranscriptRecord record_from_json(const json& j) {
    TranscriptRecord r;
    r.call_id = j.at("call_id").get<CallId>();
    r.role_tag = j.at("role_tag").get<std::string>();
    r.request = request_from_json(j.at("request"));
    const auto& resp = j.at("response");
    r.response.text = resp.at("text").get<std::string>();
    r.response.input_tokens = resp.value("input_tokens", std::int64_t{0});
    r.response.output_tokens = resp.value("output_tokens", std::int64_t{0});
    r.response.latency_ms = resp.value("latency_ms", std::int64_t{0});
    r.timestamp = j.value("timestamp", std::string{});
    r.retries = j.value("retries", 0);
    return r;
}

std::vector<TranscriptRecord> read_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Config, "cannot open transcript '" + path + "'");
    }
    std::vector<TranscriptRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Config, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

void write_transcript(const std::string& path, const std::vector<TranscriptRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Config, "cannot write transcript '" + path + "'");
    }
    for (const auto& r : records) {
        out << to_json(r).dump() << '\n';
    }
}

CallId Transcript::append(std::string role_tag, CompletionRequest request, CompletionResponse response,
                          std::string timestamp, int retries) {
    std::lock_guard lock(mutex_);
    const CallId id = static_cast<CallId>(records_.size()) + 1;
    records_.push_back({id, std::move(role_tag), std::move(request), std::move(response), std::move(timestamp),
                        retries});
    return id;
}

std::vector<TranscriptRecord> Transcript::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::vector<TranscriptRecord> Transcript::records_since(CallId after) const {
    std::lock_guard lock(mutex_);
    const auto start = static_cast<std::size_t>(std::max<CallId>(after, 0));
    if (start >= records_.size()) {
        return {};
    }
    return {records_.begin() + static_cast<std::ptrdiff_t>(start), records_.end()};
}

CallId Transcript::last_call_id() const {
    std::lock_guard lock(mutex_);
    return static_cast<CallId>(records_.size());
}

std::size_t Transcript::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

Completion CompletionBackend::complete(const CompletionRequest& request, std::string_view role_tag) {
    if (request.prompt.empty()) {
        throw Error(ErrorCode::Domain, "completion request has an empty prompt");
    }
    Answer a = answer(request);
    std::string stamp = a.timestamp ? std::move(*a.timestamp) : utc_now_iso8601();
    const CallId id = transcript_.append(std::string(role_tag), request, a.response, std::move(stamp), a.retries);
    return {std::move(a.response), id};
}

CompletionBackend::Answer EchoBackend::answer(const CompletionRequest& request) {
    CompletionResponse r;
    r.text = request.prompt;
    r.input_tokens = estimate_tokens(request.prompt);
    r.output_tokens = estimate_tokens(r.text);
    return {std::move(r), 0, std::nullopt};
}

ScriptedBackend::ScriptedBackend(TextFn fn)
    : fn_([fn = std::move(fn)](const CompletionRequest& req) {
          CompletionResponse r;
          r.text = fn(req);
          r.input_tokens = estimate_tokens(req.prompt);
          r.output_tokens = estimate_tokens(r.text);
          return r;
      }) {}

ScriptedBackend::ScriptedBackend(ResponseFn fn) : fn_(std::move(fn)) {}

CompletionBackend::Answer ScriptedBackend::answer(const CompletionRequest& request) {
    return {fn_(request), 0, std::nullopt};
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_rules(const json& table) {
    struct RuleSpec {
        std::vector<std::string> contains;
        std::optional<std::pair<std::int64_t, std::int64_t>> seed_mod;
        std::string response;
    };
    std::vector<RuleSpec> rules;
    try {
        for (const auto& r : table.value("rules", json::array())) {
            RuleSpec spec;
            if (r.contains("contains")) {
                const auto& c = r.at("contains");
                if (c.is_array()) {
                    spec.contains = c.get<std::vector<std::string>>();
                } else {
                    spec.contains.push_back(c.get<std::string>());
                }
            }
            if (r.contains("seed_mod")) {
                const auto& sm = r.at("seed_mod");
                spec.seed_mod = {{sm.at(0).get<std::int64_t>(), sm.at(1).get<std::int64_t>()}};
                if (spec.seed_mod->first <= 0) {
                    throw Error(ErrorCode::Config, "seed_mod modulus must be positive");
                }
            }
            spec.response = r.at("response").get<std::string>();
            rules.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Config, std::string("malformed scripted rule table: ") + e.what());
    }
    std::optional<std::string> fallback;
    if (table.contains("default") && table.at("default").is_object()) {
        fallback = table.at("default").at("response").get<std::string>();
    }
    return std::make_unique<ScriptedBackend>(
        TextFn([rules = std::move(rules), fallback = std::move(fallback)](const CompletionRequest& req) {
            for (const auto& rule : rules) {
                bool ok = true;
                for (const auto& needle : rule.contains) {
                    ok = ok && req.prompt.find(needle) != std::string::npos;
                }
                if (ok && rule.seed_mod) {
                    const auto seed = req.seed.value_or(0);
                    const auto [m, r] = *rule.seed_mod;
                    ok = ((seed % m) + m) % m == r;
                }
                if (ok) {
                    return rule.response;
                }
            }
            return fallback.value_or(req.prompt);
        }));
}

ReplayBackend::ReplayBackend(const std::vector<TranscriptRecord>& recorded) {
    for (const auto& r : recorded) {
        table_[request_key(r.request)].records.push_back(r);
    }
}

CompletionBackend::Answer ReplayBackend::answer(const CompletionRequest& request) {
    std::lock_guard lock(mutex_);
    const auto it = table_.find(request_key(request));
    if (it == table_.end()) {
        throw Error(ErrorCode::ReplayMiss,
                    "no recorded call matches request (prompt prefix: '" + request.prompt.substr(0, 80) + "')");
    }
    auto& entry = it->second;
    const std::size_t index = std::min(entry.served, entry.records.size() - 1);
    ++entry.served;
    const auto& rec = entry.records[index];
    return {rec.response, rec.retries, rec.timestamp};
}

}  // namespace sew
