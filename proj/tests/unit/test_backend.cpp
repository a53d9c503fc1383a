#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "support/support.hpp"

using namespace sew;
using namespace sew::testing;

namespace {

CompletionRequest req(std::string prompt, std::optional<std::int64_t> seed = std::nullopt) {
    CompletionRequest r;
    r.prompt = std::move(prompt);
    r.seed = seed;
    return r;
}

// Minimal chat-completions stand-in on a loopback port.
struct FakeProvider {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> hits{0};
    std::string last_auth;
    std::string last_body;
    std::function<void(int hit, httplib::Response&)> reply;

    FakeProvider() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
            last_auth = rq.get_header_value("Authorization");
            last_body = rq.body;
            reply(++hits, rs);
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeProvider() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"; }
};

void ok_reply(httplib::Response& rs, const std::string& text, bool usage = true) {
    nlohmann::json j{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
    if (usage) j["usage"] = {{"prompt_tokens", 11}, {"completion_tokens", 7}};
    rs.set_content(j.dump(), "application/json");
}

LiveBackend live(const std::string& url, int retries = 2) {
    ::setenv("SEW_TEST_KEY", "test-secret", 1);
    LiveBackendConfig c;
    c.endpoint = url;
    c.api_key_env = "SEW_TEST_KEY";
    c.retry_budget = retries;
    c.backoff_ms = 1;
    c.timeout_seconds = 5;
    return LiveBackend(c);
}

}  // namespace

TEST_CASE("echo backend returns the prompt and records every call") {
    EchoBackend b;
    const auto c1 = b.complete(req("hello world"), "r1");
    const auto c2 = b.complete(req("again"), "r2");
    CHECK(c1.response.text == "hello world");
    CHECK(c1.call_id == 1);
    CHECK(c2.call_id == 2);
    const auto recs = b.transcript().records();
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].role_tag == "r1");
    CHECK(recs[0].response.input_tokens == estimate_tokens("hello world"));
    CHECK(b.transcript().records_since(1).size() == 1);
    CHECK(b.transcript().last_call_id() == 2);
    CHECK_THROWS_AS(b.complete(req(""), "r"), Error);
    CHECK(b.transcript().size() == 2);
}

TEST_CASE("token estimate rounds bytes up to quarters") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("a") == 1);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("scripted rule tables") {
    const auto table = nlohmann::json::parse(R"({
        "rules": [
            {"contains": ["alpha", "beta"], "response": "both"},
            {"contains": "alpha", "seed_mod": [2, 1], "response": "odd alpha"},
            {"contains": "alpha", "response": "alpha"}
        ],
        "default": {"response": "fallback"}
    })");
    auto b = ScriptedBackend::from_rules(table);
    CHECK(b->complete(req("alpha beta"), "t").response.text == "both");
    CHECK(b->complete(req("alpha", 3), "t").response.text == "odd alpha");
    CHECK(b->complete(req("alpha", -1), "t").response.text == "odd alpha");
    CHECK(b->complete(req("alpha", 4), "t").response.text == "alpha");
    CHECK(b->complete(req("gamma"), "t").response.text == "fallback");

    auto echo = ScriptedBackend::from_rules(nlohmann::json::parse(R"({"rules": []})"));
    CHECK(echo->complete(req("same"), "t").response.text == "same");
    CHECK_THROWS_AS(ScriptedBackend::from_rules(nlohmann::json::parse(R"({"rules": [{"contains": "x"}]})")), Error);
    CHECK_THROWS_AS(
        ScriptedBackend::from_rules(nlohmann::json::parse(R"({"rules": [{"seed_mod": [0, 0], "response": "x"}]})")),
        Error);
}

TEST_CASE("transcript JSON round trip and totals") {
    ScriptedBackend b(ScriptedBackend::TextFn([](const CompletionRequest& r) { return r.prompt + "!"; }));
    b.complete(req("one", 1), "a");
    b.complete(req("two"), "b");
    b.complete(req("three"), "a");
    const auto recs = b.transcript().records();
    const auto dir = std::filesystem::temp_directory_path() / "sew-test-backend";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "t.jsonl").string();
    write_transcript(path, recs);
    const auto back = read_transcript(path);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(to_json(back[i]) == to_json(recs[i]));
    }
    CHECK(back[0].request.seed == 1);
    CHECK_FALSE(back[1].request.seed.has_value());

    const auto totals = transcript_totals(recs);
    std::int64_t in = 0, out = 0;
    for (const auto& r : recs) {
        in += r.response.input_tokens;
        out += r.response.output_tokens;
    }
    CHECK(totals.input_tokens == in);
    CHECK(totals.output_tokens == out);
    CHECK(totals.total == in + out);
    CHECK(totals.by_role.at("a").total + totals.by_role.at("b").total == totals.total);

    write_file(dir / "bad.jsonl", "{not json}\n");
    CHECK_THROWS_AS(read_transcript((dir / "bad.jsonl").string()), Error);
    CHECK_THROWS_AS(read_transcript((dir / "missing.jsonl").string()), Error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("replay serves identical requests in recorded order") {
    int n = 0;
    ScriptedBackend rec(ScriptedBackend::TextFn([&](const CompletionRequest&) { return "answer " + std::to_string(++n); }));
    rec.complete(req("p"), "x");
    rec.complete(req("q"), "x");
    rec.complete(req("p"), "x");
    ReplayBackend replay(rec.transcript().records());
    CHECK(replay.complete(req("p"), "x").response.text == "answer 1");
    CHECK(replay.complete(req("p"), "x").response.text == "answer 3");
    CHECK(replay.complete(req("p"), "x").response.text == "answer 3");
    CHECK(replay.complete(req("q"), "x").response.text == "answer 2");
    CHECK(replay.transcript().records()[0].timestamp == rec.transcript().records()[0].timestamp);
    try {
        replay.complete(req("p", 5), "x");  // seed is part of the key
        FAIL("expected a replay miss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ReplayMiss);
        CHECK(e.is_backend_error());
    }
    CHECK(replay.transcript().size() == 4);
}

TEST_CASE("live backend requires its key variable") {
    LiveBackendConfig c;
    c.endpoint = "http://127.0.0.1:9/x";
    c.api_key_env = "SEW_TEST_UNSET_KEY";
    ::unsetenv("SEW_TEST_UNSET_KEY");
    CHECK_THROWS_AS(LiveBackend{c}, Error);
}

TEST_CASE("live backend against a loopback provider") {
    FakeProvider p;

    SUBCASE("success with usage") {
        p.reply = [](int, httplib::Response& rs) { ok_reply(rs, "hi there"); };
        auto b = live(p.url());
        const auto c = b.complete(req("prompt text", 42), "role");
        CHECK(c.response.text == "hi there");
        CHECK(c.response.input_tokens == 11);
        CHECK(c.response.output_tokens == 7);
        CHECK(p.last_auth == "Bearer test-secret");
        const auto body = nlohmann::json::parse(p.last_body);
        CHECK(body["messages"][0]["content"] == "prompt text");
        CHECK(body["seed"] == 42);
        CHECK(body["model"] == "gpt-4o-mini");
        CHECK(b.transcript().records()[0].retries == 0);
    }
    SUBCASE("missing usage falls back to the estimate") {
        p.reply = [](int, httplib::Response& rs) { ok_reply(rs, "abcdefgh", false); };
        auto b = live(p.url());
        const auto c = b.complete(req("abcd"), "role");
        CHECK(c.response.input_tokens == 1);
        CHECK(c.response.output_tokens == 2);
    }
    SUBCASE("transient failures are retried") {
        p.reply = [](int hit, httplib::Response& rs) {
            if (hit < 3) {
                rs.status = 503;
                rs.set_content("busy", "text/plain");
            } else {
                ok_reply(rs, "finally");
            }
        };
        auto b = live(p.url());
        CHECK(b.complete(req("x"), "r").response.text == "finally");
        CHECK(b.transcript().records()[0].retries == 2);
        CHECK(p.hits == 3);
    }
    SUBCASE("rate limiting exhausts into a quota error") {
        p.reply = [](int, httplib::Response& rs) { rs.status = 429; };
        auto b = live(p.url(), 1);
        try {
            b.complete(req("x"), "r");
            FAIL("expected quota error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Quota);
        }
        CHECK(p.hits == 2);
        CHECK(b.transcript().size() == 0);
    }
    SUBCASE("malformed body") {
        p.reply = [](int, httplib::Response& rs) { rs.set_content("{\"choices\": []}", "application/json"); };
        auto b = live(p.url());
        try {
            b.complete(req("x"), "r");
            FAIL("expected malformed response");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::MalformedResponse);
        }
    }
    SUBCASE("client errors are not retried") {
        p.reply = [](int, httplib::Response& rs) { rs.status = 400; };
        auto b = live(p.url());
        CHECK_THROWS_AS(b.complete(req("x"), "r"), Error);
        CHECK(p.hits == 1);
    }
}

TEST_CASE("unreachable provider is a network error") {
    int port = 0;
    {
        httplib::Server s;
        port = s.bind_to_any_port("127.0.0.1");
    }  // closed again: connections are refused
    auto b = live("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", 1);
    try {
        b.complete(req("x"), "r");
        FAIL("expected network error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Network);
    }
}
