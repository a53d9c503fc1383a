#include <algorithm>
#include <fstream>
#include <sstream>

#include "sew/execution.hpp"

namespace sew {

namespace {

using nlohmann::json;

std::string str_field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorCode::Config, "task line " + std::to_string(line) + ": missing '" + key + "'");
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw Error(ErrorCode::Config, "task line " + std::to_string(line) + ": '" + key + "' must be a string");
}

/// Splits `assert <callee>(<args>) == <expected>` into args and expected.
/// Parentheses are matched outside string literals.
std::optional<std::pair<std::string, std::string>> split_assert(std::string_view line, std::string_view callee) {
    auto start = line.find_first_not_of(" \t");
    if (start == std::string_view::npos) return std::nullopt;
    line.remove_prefix(start);
    if (!line.starts_with("assert")) return std::nullopt;
    line.remove_prefix(6);
    const auto call = line.find_first_not_of(" \t");
    if (call == std::string_view::npos || line.substr(call, callee.size()) != callee) return std::nullopt;
    std::size_t i = call + callee.size();
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size() || line[i] != '(') return std::nullopt;
    const std::size_t open = i;
    int depth = 0;
    char quote = 0;
    for (; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"') quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if (c == ')' || c == ']' || c == '}') {
            if (--depth == 0) break;
        }
    }
    if (i >= line.size()) return std::nullopt;
    std::string args(line.substr(open + 1, i - open - 1));
    std::string_view rest = line.substr(i + 1);
    const auto eq = rest.find_first_not_of(" \t");
    if (eq == std::string_view::npos || rest.substr(eq, 2) != "==") return std::nullopt;
    rest.remove_prefix(eq + 2);
    const auto b = rest.find_first_not_of(" \t");
    const auto e = rest.find_last_not_of(" \t\r");
    if (b == std::string_view::npos) return std::nullopt;
    return std::pair{std::move(args), std::string(rest.substr(b, e - b + 1))};
}

std::vector<TestCase> asserts_to_tests(std::string_view source, std::string_view callee) {
    std::vector<TestCase> tests;
    std::istringstream in{std::string(source)};
    std::string line;
    while (std::getline(in, line)) {
        if (auto parts = split_assert(line, callee)) {
            tests.push_back({TestKind::Functional, std::move(parts->first), std::move(parts->second)});
        }
    }
    return tests;
}

TaskInstance from_sew(const json& j, std::size_t line) {
    TaskInstance t;
    t.id = str_field(j, "id", line);
    t.description = str_field(j, "description", line);
    if (j.contains("entry_point") && !j["entry_point"].is_null()) {
        t.entry_point = j["entry_point"].get<std::string>();
    }
    for (const auto& tj : j.at("tests")) {
        TestCase tc;
        const std::string kind = tj.at("kind").get<std::string>();
        if (kind == "STDIO" || kind == "stdio") tc.kind = TestKind::Stdio;
        else if (kind == "FUNCTIONAL" || kind == "functional") tc.kind = TestKind::Functional;
        else throw Error(ErrorCode::Config, "task line " + std::to_string(line) + ": unknown test kind '" + kind + "'");
        tc.input = tj.at("input").get<std::string>();
        tc.expected = tj.at("expected").get<std::string>();
        t.tests.push_back(std::move(tc));
    }
    return t;
}

// HumanEval: {task_id, prompt, entry_point, test} with `assert candidate(...) == ...` lines.
TaskInstance from_humaneval(const json& j, std::size_t line) {
    TaskInstance t;
    t.id = str_field(j, "task_id", line);
    t.description = str_field(j, "prompt", line);
    t.entry_point = str_field(j, "entry_point", line);
    t.tests = asserts_to_tests(str_field(j, "test", line), "candidate");
    return t;
}

// MBPP: {task_id, text, test_list: ["assert f(...) == ..."]}.
TaskInstance from_mbpp(const json& j, std::size_t line) {
    TaskInstance t;
    t.id = str_field(j, "task_id", line);
    const auto& tests = j.at("test_list");
    std::string joined;
    for (const auto& s : tests) joined += s.get<std::string>() + "\n";
    std::string entry;
    if (!tests.empty()) {
        const std::string first = tests.front().get<std::string>();
        const auto b = first.find("assert") == std::string::npos ? 0 : first.find("assert") + 6;
        const auto s = first.find_first_not_of(" \t", b);
        const auto e = first.find('(', s);
        if (s != std::string::npos && e != std::string::npos) {
            entry = first.substr(s, e - s);
            while (!entry.empty() && entry.back() == ' ') entry.pop_back();
        }
    }
    if (entry.empty()) {
        throw Error(ErrorCode::Config, "task line " + std::to_string(line) + ": cannot infer the MBPP entry point");
    }
    t.entry_point = entry;
    t.description = str_field(j, "text", line) + "\nYour code should pass these tests:\n" + joined;
    t.tests = asserts_to_tests(joined, entry);
    return t;
}

// LiveCodeBench: {question_id, question_content, public_test_cases, private_test_cases?,
// metadata: {func_name}}; test-case lists may be JSON-encoded strings.
TaskInstance from_livecodebench(const json& j, std::size_t line) {
    TaskInstance t;
    t.id = str_field(j, "question_id", line);
    t.description = str_field(j, "question_content", line);
    if (j.contains("metadata")) {
        json meta = j["metadata"];
        if (meta.is_string()) meta = json::parse(meta.get<std::string>());
        if (meta.contains("func_name") && meta["func_name"].is_string()) {
            t.entry_point = meta["func_name"].get<std::string>();
        }
    }
    for (const char* key : {"public_test_cases", "private_test_cases"}) {
        if (!j.contains(key)) continue;
        json cases = j[key];
        if (cases.is_string()) {
            const std::string raw = cases.get<std::string>();
            if (raw.empty()) continue;
            cases = json::parse(raw);
        }
        for (const auto& c : cases) {
            TestCase tc;
            const std::string type = c.value("testtype", "stdin");
            tc.kind = type == "functional" ? TestKind::Functional : TestKind::Stdio;
            tc.input = c.at("input").get<std::string>();
            tc.expected = c.at("output").get<std::string>();
            if (tc.kind == TestKind::Functional) {
                // One JSON value per line, decoded by json.loads in the harness.
                std::string args;
                std::istringstream in(tc.input);
                std::string arg;
                while (std::getline(in, arg)) {
                    if (arg.find_first_not_of(" \t\r") == std::string::npos) continue;
                    if (!args.empty()) args += ", ";
                    args += arg;
                }
                tc.input = "*__import__('json').loads('[' + " + json(args).dump() + " + ']')";
                tc.expected = "__import__('json').loads(" + json(tc.expected).dump() + ")";
            }
            t.tests.push_back(std::move(tc));
        }
    }
    if (std::none_of(t.tests.begin(), t.tests.end(), [](const TestCase& c) { return c.kind == TestKind::Functional; })) {
        t.entry_point.reset();
    }
    return t;
}

std::pair<std::size_t, std::size_t> parse_split(std::string_view split, std::size_t size) {
    if (split.empty()) return {0, size};
    const auto colon = split.find(':');
    if (colon == std::string_view::npos) {
        throw Error(ErrorCode::Config, "split must look like start:end, got '" + std::string(split) + "'");
    }
    auto num = [&](std::string_view s, std::size_t fallback) -> std::size_t {
        if (s.empty()) return fallback;
        try {
            return static_cast<std::size_t>(std::stoull(std::string(s)));
        } catch (const std::exception&) {
            throw Error(ErrorCode::Config, "bad split bound '" + std::string(s) + "'");
        }
    };
    const std::size_t b = std::min(num(split.substr(0, colon), 0), size);
    const std::size_t e = std::min(num(split.substr(colon + 1), size), size);
    if (b > e) throw Error(ErrorCode::Config, "empty split '" + std::string(split) + "'");
    return {b, e};
}

}  // namespace

std::vector<TaskInstance> parse_tasks(std::string_view jsonl, std::string_view format) {
    TaskInstance (*convert)(const json&, std::size_t) = nullptr;
    if (format == "sew") convert = from_sew;
    else if (format == "humaneval") convert = from_humaneval;
    else if (format == "mbpp") convert = from_mbpp;
    else if (format == "livecodebench") convert = from_livecodebench;
    else throw Error(ErrorCode::Config, "unknown dataset format '" + std::string(format) + "'");

    std::vector<TaskInstance> tasks;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        TaskInstance t;
        try {
            t = convert(json::parse(line), lineno);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Config, "task line " + std::to_string(lineno) + ": " + e.what());
        }
        check_task(t);
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<TaskInstance> load_tasks(const std::string& path, std::string_view format, std::string_view split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Config, "cannot open dataset '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::vector<TaskInstance> all = parse_tasks(ss.str(), format);
    const auto [b, e] = parse_split(split, all.size());
    return {std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(b)),
            std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(e))};
}

nlohmann::json to_json(const TaskInstance& task) {
    json tests = json::array();
    for (const auto& t : task.tests) {
        tests.push_back({{"kind", t.kind == TestKind::Stdio ? "STDIO" : "FUNCTIONAL"},
                         {"input", t.input},
                         {"expected", t.expected}});
    }
    json j{{"id", task.id}, {"description", task.description}, {"tests", tests}};
    if (task.entry_point) j["entry_point"] = *task.entry_point;
    return j;
}

}  // namespace sew
