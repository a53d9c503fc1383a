#include <doctest.h>

#include "support/support.hpp"

using namespace sew;
using namespace sew::testing;

namespace {

TaskInstance stdio_task(std::string description, std::vector<std::pair<std::string, std::string>> io) {
    TaskInstance t{"t", std::move(description), {}, std::nullopt};
    for (auto& [in, out] : io) t.tests.push_back({TestKind::Stdio, in, out});
    return t;
}

std::map<std::string, AgentSpec> agents_for(const WorkflowIR& w) {
    std::map<std::string, AgentSpec> out;
    for (const auto& name : agent_names(w)) out[name] = {name, "You are " + name + "."};
    return out;
}

WorkflowIR review_loop_ir() {
    return parse({read_file(data_dir() / "fixtures/code_rewriting_workflow.pseudo"), Scheme::Pseudo});
}

}  // namespace

TEST_CASE("prompt assembly") {
    const AgentSpec a{"x", "PROMPT"};
    const StepSpec s{"x", {"task_description", "code"}, "out"};
    const std::map<std::string, std::string> b{{"task_description", "T"}, {"code", "C"}};
    CHECK(assemble_prompt(a, s, b) == "PROMPT\n\n== task_description ==\nT\n\n== code ==\nC");
    CHECK(assemble_prompt(a, {"x", {}, "o"}, b) == "PROMPT");
    CHECK(assemble_prompt(a, s, b, "|") == "PROMPT|== task_description ==\nT|== code ==\nC");
    CHECK_THROWS_AS(assemble_prompt(a, {"x", {"missing"}, "o"}, b), Error);
}

TEST_CASE("echo execution threads bindings through the pipeline") {
    EchoBackend b;
    const auto w = task_parsing_ir();
    const auto task = stdio_task("DESC", {{"1", "1"}});
    const auto run = execute_workflow(w, agents_for(w), task, b);
    REQUIRE(run.traces.size() == 2);
    const std::string parsed = "You are task_parsing_agent.\n\n== task_description ==\nDESC";
    CHECK(run.traces[0].completion_text == parsed);
    CHECK(run.final_output ==
          "You are code_generation_agent.\n\n== task_description ==\nDESC\n\n== parsed_task ==\n" + parsed);
    CHECK(run.traces[1].bindings_after.at("parsed_task") == parsed);
    const auto recs = b.transcript().records();
    CHECK(recs[0].role_tag == "agent:task_parsing_agent");
    CHECK(recs[0].request.temperature == doctest::Approx(1.0));
}

TEST_CASE("missing agent prompts and unbound workflows are rejected before any call") {
    EchoBackend b;
    const auto w = task_parsing_ir();
    auto agents = agents_for(w);
    agents.erase("code_generation_agent");
    try {
        execute_workflow(w, agents, stdio_task("d", {{"", ""}}), b);
        FAIL("expected MissingAgent");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingAgent);
    }
    WorkflowIR broken = w;
    broken.steps[0].args = {"nothing"};
    CHECK_THROWS_AS(execute_workflow(broken, agents_for(broken), stdio_task("d", {{"", ""}}), b), Error);
    CHECK(b.transcript().size() == 0);
}

TEST_CASE("review loop follows the reviewer verdicts") {
    const auto w = review_loop_ir();
    REQUIRE(validate(w).valid());
    const auto task = stdio_task("d", {{"", ""}});

    auto scripted = [](std::vector<std::string> verdicts) {
        auto state = std::make_shared<std::pair<std::vector<std::string>, std::size_t>>(std::move(verdicts), 0);
        auto rewrites = std::make_shared<int>(0);
        return ScriptedBackend(ScriptedBackend::TextFn([state, rewrites](const CompletionRequest& r) -> std::string {
            if (r.prompt.rfind("You are code_reviewer_agent", 0) == 0) {
                auto& [v, i] = *state;
                return v[std::min(i++, v.size() - 1)];
            }
            if (r.prompt.rfind("You are code_rewriting_agent", 0) == 0) return "rewrite " + std::to_string(++*rewrites);
            return "original";
        }));
    };
    auto reviewer_calls = [](const WorkflowRun& run, const std::string& name) {
        return std::count_if(run.traces.begin(), run.traces.end(),
                             [&](const StepTrace& t) { return t.agent_name == name; });
    };

    SUBCASE("0, 0, 1 gives two rewrites") {
        auto b = scripted({"0", "0", "1"});
        const auto run = execute_workflow(w, agents_for(w), task, b);
        CHECK(reviewer_calls(run, "code_reviewer_agent") == 3);
        CHECK(reviewer_calls(run, "code_rewriting_agent") == 2);
        CHECK(run.final_output == "rewrite 2");
        // The second review sees the first rewrite as the code under review.
        CHECK(run.traces[3].assembled_prompt.find("== generated_code ==\nrewrite 1") != std::string::npos);
    }
    SUBCASE("immediate approval keeps the generated code") {
        auto b = scripted({"1"});
        const auto run = execute_workflow(w, agents_for(w), task, b);
        CHECK(reviewer_calls(run, "code_rewriting_agent") == 0);
        CHECK(run.final_output == "original");
    }
    SUBCASE("endless rejection is capped") {
        auto b = scripted({"0"});
        ExecutionOptions o;
        o.loop.max_iterations = 3;
        const auto run = execute_workflow(w, agents_for(w), task, b, o);
        CHECK(reviewer_calls(run, "code_rewriting_agent") == 3);
        CHECK(reviewer_calls(run, "code_reviewer_agent") == 3);
        CHECK(run.final_output == "rewrite 3");
    }
    SUBCASE("free-text review rewrites once") {
        auto b = scripted({"The loop is off by one."});
        const auto run = execute_workflow(w, agents_for(w), task, b);
        CHECK(reviewer_calls(run, "code_rewriting_agent") == 1);
        CHECK(reviewer_calls(run, "code_reviewer_agent") == 1);
        CHECK(run.final_output == "rewrite 1");
    }
}

TEST_CASE("code extraction") {
    CHECK(extract_code("Here you go:\n```python\nprint(1)\n```\n") == "print(1)\n");
    CHECK(extract_code("```\na = 1\n```\ntext\n```py\nb = 2\n```") == "b = 2\n");
    CHECK(extract_code("\n\nimport sys\nprint(sys.argv)") == "\n\nimport sys\nprint(sys.argv)");
    CHECK(extract_code("def f(x):\n    return x") == "def f(x):\n    return x");
    CHECK(extract_code("n = int(input())\nprint(n)") == "n = int(input())\nprint(n)");
    CHECK(extract_code("x += 1") == "x += 1");
    CHECK(extract_code("main()") == "main()");
    CHECK(extract_code("from math import sqrt\n") == "from math import sqrt\n");
    for (const char* bad : {"", "   \n", "Sorry, I cannot do that.", "The answer is 42.", "```python\n\n```",
                            "x == 1"}) {
        try {
            extract_code(bad);
            FAIL("expected NoCodeFound for: " << bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoCodeFound);
        }
    }
}

TEST_CASE("stdout normalisation") {
    CHECK(normalize_stdout("a  \nb\t\n\n\n") == "a\nb");
    CHECK(normalize_stdout("a\r\nb\r\n") == "a\nb");
    CHECK(normalize_stdout("") == "");
    CHECK(normalize_stdout("\n a") == "\n a");
    CHECK(normalize_stdout("x") == normalize_stdout("x\n"));
}

TEST_CASE("verdict and task checks") {
    CHECK(to_string(Verdict::Pass) == "PASS");
    CHECK(to_string(Verdict::OutputOverflow) == "OUTPUT_OVERFLOW");
    CHECK_THROWS_AS(check_task({"a", "d", {}, std::nullopt}), Error);
    CHECK_THROWS_AS(check_task({"a", "d", {{TestKind::Functional, "1", "1"}}, std::nullopt}), Error);
    CHECK_THROWS_AS(check_task({"a", "d", {{TestKind::Stdio, "1", "1"}}, "f"}), Error);
    SandboxPolicy p;
    p.wall_timeout_ms = 0;
    CHECK_THROWS_AS(check_policy(p), Error);
    p = {};
    p.interpreter_command.clear();
    CHECK_THROWS_AS(check_policy(p), Error);
}

TEST_CASE("candidates are judged per test") {
    const auto tasks = load_tasks((data_dir() / "tasks/desk.jsonl").string());
    REQUIRE(tasks.size() == desk_solutions().size());
    SandboxPolicy policy;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        CAPTURE(tasks[i].id);
        const auto good = run_candidate(desk_solutions()[i].code, tasks[i], policy);
        CHECK(good.passed_all);
        CHECK(good.syntax_valid);
        const auto wrong = run_candidate("print('wrong')\n", tasks[i], policy);
        CHECK_FALSE(wrong.passed_all);
        CHECK(wrong.verdicts.front() == Verdict::WrongOutput);
    }
    const auto syntax = run_candidate("def f(:\n", tasks[0], policy);
    CHECK_FALSE(syntax.syntax_valid);
    CHECK(syntax.verdicts == std::vector<Verdict>(tasks[0].tests.size(), Verdict::SyntaxError));
    const auto crash = run_candidate("raise SystemExit(3)\n", tasks[0], policy);
    CHECK(crash.verdicts.front() == Verdict::RuntimeError);
}

TEST_CASE("functional tests through the harness") {
    const auto tasks = load_tasks((data_dir() / "tasks/humaneval_style.jsonl").string(), "humaneval");
    REQUIRE(tasks.size() == 5);
    CHECK(tasks[0].entry_point == "add_pairs");
    REQUIRE(tasks[0].tests.size() == 4);
    CHECK(tasks[0].tests[0].input == "[1, 2, 3]");
    CHECK(tasks[0].tests[0].expected == "[3, 5]");
    SandboxPolicy policy;
    const auto good = run_candidate("def add_pairs(xs):\n    return [a + b for a, b in zip(xs, xs[1:])]\n", tasks[0], policy);
    CHECK(good.passed_all);
    const auto wrong = run_candidate("def add_pairs(xs):\n    return xs\n", tasks[0], policy);
    CHECK(wrong.verdicts[0] == Verdict::WrongOutput);
    CHECK(wrong.verdicts[1] == Verdict::Pass);  // [] == []
    const auto missing = run_candidate("def other(xs):\n    return xs\n", tasks[0], policy);
    CHECK(missing.verdicts[0] == Verdict::RuntimeError);
}

TEST_CASE("dataset formats") {
    const std::string mbpp =
        R"({"task_id": 11, "text": "Write a function to add two numbers.", "test_list": ["assert add(1, 2) == 3", "assert add(-1, 1) == 0"]})";
    auto t = parse_tasks(mbpp, "mbpp");
    REQUIRE(t.size() == 1);
    CHECK(t[0].id == "11");
    CHECK(t[0].entry_point == "add");
    CHECK(t[0].tests.size() == 2);
    CHECK(t[0].description.find("assert add(1, 2) == 3") != std::string::npos);
    CHECK(run_candidate("def add(a, b):\n    return a + b\n", t[0], {}).passed_all);

    const std::string lcb_stdin =
        R"({"question_id": "q1", "question_content": "Echo.", "public_test_cases": "[{\"input\": \"hi\\n\", \"output\": \"hi\\n\", \"testtype\": \"stdin\"}]", "metadata": "{}"})";
    t = parse_tasks(lcb_stdin, "livecodebench");
    REQUIRE(t.size() == 1);
    CHECK_FALSE(t[0].entry_point.has_value());
    CHECK(run_candidate("print(input())\n", t[0], {}).passed_all);

    const std::string lcb_func =
        R"({"question_id": "q2", "question_content": "Sum.", "public_test_cases": [{"input": "[1, 2]\n3", "output": "6", "testtype": "functional"}], "metadata": {"func_name": "total"}})";
    t = parse_tasks(lcb_func, "livecodebench");
    REQUIRE(t.size() == 1);
    CHECK(t[0].entry_point == "total");
    CHECK(run_candidate("def total(xs, k):\n    return sum(xs) + k\n", t[0], {}).passed_all);
    CHECK_FALSE(run_candidate("def total(xs, k):\n    return 0\n", t[0], {}).passed_all);

    CHECK_THROWS_AS(parse_tasks("{\"id\": \"x\"}", "sew"), Error);
    CHECK_THROWS_AS(parse_tasks("{}", "unknown"), Error);
    CHECK_THROWS_AS(parse_tasks("not json", "sew"), Error);

    const auto path = (data_dir() / "tasks/desk.jsonl").string();
    CHECK(load_tasks(path, "sew", "1:3").size() == 2);
    CHECK(load_tasks(path, "sew", "1:3")[0].id == "sum_list");
    CHECK(load_tasks(path, "sew", ":2").size() == 2);
    CHECK(load_tasks(path, "sew", "3:").size() == 2);
    CHECK_THROWS_AS(load_tasks(path, "sew", "3:1"), Error);
    CHECK_THROWS_AS(load_tasks(path, "sew", "x"), Error);

    const auto round = parse_tasks(to_json(load_tasks(path)[0]).dump(), "sew");
    CHECK(round[0].tests.size() == 3);
}

TEST_CASE("sampling: n runs with consecutive seeds, then judged in parallel") {
    const auto tasks = load_tasks((data_dir() / "tasks/desk.jsonl").string());
    DeskModel model;
    model.correct = [](std::size_t, std::int64_t seed, bool) { return seed % 2 == 0; };
    ScriptedBackend b(ScriptedBackend::TextFn(std::cref(model)));
    const auto w = task_parsing_ir();
    ExecutionOptions o;
    o.seed = 10;
    const auto results = sample_candidates(w, agents_for(w), tasks[0], b, 4, {}, o);
    REQUIRE(results.size() == 4);
    CHECK(results[0].passed_all);
    CHECK_FALSE(results[1].passed_all);
    CHECK(results[2].passed_all);
    CHECK_FALSE(results[3].passed_all);
    const auto recs = b.transcript().records();
    REQUIRE(recs.size() == 8);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].request.seed == 10 + static_cast<std::int64_t>(i / 2));

    ScriptedBackend prose(ScriptedBackend::TextFn([](const CompletionRequest&) { return std::string("No idea."); }));
    const auto none = sample_candidates(w, agents_for(w), tasks[0], prose, 2, {}, o);
    CHECK_FALSE(none[0].extracted);
    CHECK(none[0].verdicts == std::vector<Verdict>(tasks[0].tests.size(), Verdict::RuntimeError));
    CHECK_THROWS_AS(sample_candidates(w, agents_for(w), tasks[0], prose, 0, {}, o), Error);
}
