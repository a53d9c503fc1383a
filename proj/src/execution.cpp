#include "sew/execution.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include "sew/sandbox.hpp"

namespace sew {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_reviewer(std::string_view name) {
    return name.starts_with("code_review");
}

bool is_rewriter(std::string_view name) {
    return name.starts_with("code_rewrit") || name.starts_with("code_refine");
}

/// The binding a reviewer/rewriter pair operates on: the first reviewer arg
/// produced by a code-producing step, else its last non-task argument.
std::optional<std::string> reviewed_binding(const WorkflowIR& w, std::size_t reviewer) {
    const CodeProducerNames producers;
    const auto& args = w.steps[reviewer].args;
    for (const auto& arg : args) {
        for (std::size_t i = 0; i < reviewer; ++i) {
            if (w.steps[i].output == arg && producers.matches(w.steps[i].name)) {
                return arg;
            }
        }
    }
    for (auto it = args.rbegin(); it != args.rend(); ++it) {
        if (*it != kTaskDescription) {
            return *it;
        }
    }
    return std::nullopt;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error(ErrorCode::SandboxSetup, "cannot write " + path.string());
    }
}

constexpr std::string_view kSolutionFile = "solution.py";
constexpr std::string_view kHarnessFile = "harness.py";
constexpr int kHarnessMismatch = 7;

// Loads the solution as a module, calls the entry point with the decoded
// argument tuple and compares against the decoded expected value.
constexpr std::string_view kHarness = R"(import runpy, sys
_ns = runpy.run_path('solution.py', run_name='__sew_solution__')
_entry = open('entry.txt', encoding='utf-8').read()
_src = open('args.txt', encoding='utf-8').read()
_args = eval('(' + _src + ',)') if _src.strip() else ()
_expected = eval(open('expected.txt', encoding='utf-8').read())
_result = _ns[_entry](*_args)
if _result != _expected:
    sys.stderr.write('expected %r, got %r\n' % (_expected, _result))
    sys.exit(7)
)";

ProcessLimits limits_for(const SandboxPolicy& policy) {
    ProcessLimits limits;
    limits.wall_timeout = std::chrono::milliseconds(policy.wall_timeout_ms);
    limits.max_output_bytes = policy.max_output_bytes;
    limits.isolate = policy.workdir_isolation;
    return limits;
}

Verdict run_test(const std::string& code, const TaskInstance& task, const TestCase& test,
                 const SandboxPolicy& policy) {
    ScratchDir dir;
    write_file(dir.path() / kSolutionFile, code);
    std::vector<std::string> argv = policy.interpreter_command;
    std::string stdin_data;
    if (test.kind == TestKind::Stdio) {
        argv.emplace_back(kSolutionFile);
        stdin_data = test.input;
    } else {
        write_file(dir.path() / kHarnessFile, kHarness);
        write_file(dir.path() / "entry.txt", task.entry_point.value_or(""));
        write_file(dir.path() / "args.txt", test.input);
        write_file(dir.path() / "expected.txt", test.expected);
        argv.emplace_back(kHarnessFile);
    }
    const ProcessResult r = run_process(argv, stdin_data, dir.path(), limits_for(policy));
    if (r.timed_out) {
        return Verdict::Timeout;
    }
    if (r.output_overflow) {
        return Verdict::OutputOverflow;
    }
    if (r.term_signal != 0) {
        return Verdict::RuntimeError;
    }
    if (test.kind == TestKind::Functional) {
        if (r.exit_code == kHarnessMismatch) {
            return Verdict::WrongOutput;
        }
        return r.exit_code == 0 ? Verdict::Pass : Verdict::RuntimeError;
    }
    if (r.exit_code != 0) {
        return Verdict::RuntimeError;
    }
    return normalize_stdout(r.stdout_data) == normalize_stdout(test.expected) ? Verdict::Pass : Verdict::WrongOutput;
}

bool syntax_ok(const std::string& code, const SandboxPolicy& policy) {
    if (policy.syntax_check_command.empty()) {
        return true;
    }
    ScratchDir dir;
    write_file(dir.path() / kSolutionFile, code);
    std::vector<std::string> argv = policy.syntax_check_command;
    argv.emplace_back(kSolutionFile);
    const ProcessResult r = run_process(argv, "", dir.path(), limits_for(policy));
    return r.ok();
}

/// Runs fn(i) for i in [0, count) on up to `parallelism` threads. The first
/// exception is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, int parallelism, Fn fn) {
    const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, parallelism)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void check_task(const TaskInstance& task) {
    if (task.tests.empty()) {
        throw Error(ErrorCode::Config, "task '" + task.id + "' has no tests");
    }
    for (const auto& t : task.tests) {
        if (t.kind == TestKind::Functional && !task.entry_point) {
            throw Error(ErrorCode::Config, "task '" + task.id + "': functional test without entry_point");
        }
        if (t.kind == TestKind::Stdio && task.entry_point) {
            throw Error(ErrorCode::Config, "task '" + task.id + "': stdio test with an entry_point");
        }
    }
}

void check_policy(const SandboxPolicy& policy) {
    if (policy.wall_timeout_ms <= 0) {
        throw Error(ErrorCode::Config, "sandbox wall_timeout_ms must be positive");
    }
    if (policy.max_output_bytes == 0) {
        throw Error(ErrorCode::Config, "sandbox max_output_bytes must be positive");
    }
    if (policy.interpreter_command.empty() || policy.interpreter_command.front().empty()) {
        throw Error(ErrorCode::Config, "sandbox interpreter_command is empty");
    }
    if (policy.parallelism < 1) {
        throw Error(ErrorCode::Config, "sandbox parallelism must be at least 1");
    }
}

std::string assemble_prompt(const AgentSpec& agent, const StepSpec& step,
                            const std::map<std::string, std::string>& bindings, std::string_view separator) {
    std::string out = agent.prompt;
    for (const auto& arg : step.args) {
        auto it = bindings.find(arg);
        if (it == bindings.end()) {
            throw Error(ErrorCode::Unbound, "step '" + step.name + "' argument '" + arg + "' is unbound");
        }
        out.append(separator).append("== ").append(arg).append(" ==\n").append(it->second);
    }
    return out;
}

std::map<std::string, AgentSpec> agent_map(const std::vector<AgentSpec>& agents) {
    std::map<std::string, AgentSpec> out;
    for (const auto& a : agents) {
        out[a.name] = a;
    }
    return out;
}

WorkflowRun execute_workflow(const WorkflowIR& w, const std::map<std::string, AgentSpec>& agents,
                             const TaskInstance& task, CompletionBackend& backend, const ExecutionOptions& options) {
    const std::vector<std::size_t> order = topo_order(w);
    for (const auto& step : w.steps) {
        if (!agents.contains(step.name)) {
            throw Error(ErrorCode::MissingAgent, "no prompt for agent '" + step.name + "'");
        }
    }

    WorkflowRun run;
    std::map<std::string, std::string> bindings{{std::string(kTaskDescription), task.description}};

    auto call = [&](std::size_t idx) -> const std::string& {
        const StepSpec& step = w.steps[idx];
        CompletionRequest req;
        req.prompt = assemble_prompt(agents.at(step.name), step, bindings, options.separator);
        req.model = options.model;
        req.temperature = options.temperature;
        req.max_tokens = options.max_tokens;
        req.seed = options.seed;
        Completion c = backend.complete(req, "agent:" + step.name);
        bindings[step.output] = c.response.text;
        run.traces.push_back({idx, step.name, std::move(req.prompt), std::move(c.response.text), bindings});
        return run.traces.back().completion_text;
    };

    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const std::size_t idx = order[pos];
        const bool paired = pos + 1 < order.size() && order[pos + 1] == idx + 1 && is_reviewer(w.steps[idx].name) &&
                            is_rewriter(w.steps[idx + 1].name);
        if (!paired) {
            call(idx);
            continue;
        }
        const std::size_t rewriter = idx + 1;
        const auto code_key = reviewed_binding(w, idx);
        int rewrites = 0;
        while (true) {
            const std::string verdict = trim(call(idx));
            if (verdict == "1") {
                if (rewrites == 0) {
                    bindings[w.steps[rewriter].output] = code_key ? bindings[*code_key] : std::string();
                }
                break;
            }
            const std::string rewrite = call(rewriter);
            ++rewrites;
            if (verdict != "0" || rewrites >= options.loop.max_iterations) {
                break;
            }
            if (code_key) {
                bindings[*code_key] = rewrite;
            }
        }
        ++pos;
    }
    run.final_output = bindings.at(w.steps.back().output);
    return run;
}

std::string extract_code(std::string_view completion) {
    // Fenced blocks: an opening ``` line (optionally tagged) up to a closing ``` line.
    std::optional<std::string> last;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = completion.find("```", pos);
        if (open == std::string_view::npos) break;
        const std::size_t body = completion.find('\n', open);
        if (body == std::string_view::npos) break;
        std::size_t close = completion.find("```", body + 1);
        if (close == std::string_view::npos) break;
        std::string_view block = completion.substr(body + 1, close - body - 1);
        last = std::string(block);
        pos = close + 3;
    }
    if (last) {
        if (trim(*last).empty()) {
            throw Error(ErrorCode::NoCodeFound, "last fenced block is empty");
        }
        return *last;
    }

    // Bare program: judge by the first non-blank line.
    static const std::regex code_start(
        R"(^(import\s|from\s+[\w.]+\s+import\s|def\s|async\s+def\s|class\s|#!|@\w|print\(|for\s|while\s|with\s|try:|[A-Za-z_][\w.]*(\[[^\]]*\])?\s*([-+*/%|&^]?=[^=]|\()))");
    std::size_t line_start = 0;
    while (line_start < completion.size()) {
        std::size_t eol = completion.find('\n', line_start);
        if (eol == std::string_view::npos) eol = completion.size();
        const std::string line = trim(completion.substr(line_start, eol - line_start));
        if (!line.empty()) {
            if (std::regex_search(line, code_start)) {
                return std::string(completion);
            }
            break;
        }
        line_start = eol + 1;
    }
    throw Error(ErrorCode::NoCodeFound, "completion contains no recognizable program");
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::WrongOutput: return "WRONG_OUTPUT";
    case Verdict::RuntimeError: return "RUNTIME_ERROR";
    case Verdict::Timeout: return "TIMEOUT";
    case Verdict::SyntaxError: return "SYNTAX_ERROR";
    case Verdict::OutputOverflow: return "OUTPUT_OVERFLOW";
    }
    return "UNKNOWN";
}

std::string normalize_stdout(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        const auto end = line.find_last_not_of(" \t\r\f\v");
        lines.emplace_back(end == std::string_view::npos ? std::string_view{} : line.substr(0, end + 1));
        pos = eol + 1;
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out += '\n';
        out += lines[i];
    }
    return out;
}

CandidateResult run_candidate(const std::string& code, const TaskInstance& task, const SandboxPolicy& policy) {
    check_policy(policy);
    CandidateResult result;
    result.code = code;
    result.extracted = true;
    result.syntax_valid = syntax_ok(code, policy);
    if (!result.syntax_valid) {
        result.verdicts.assign(task.tests.size(), Verdict::SyntaxError);
        return result;
    }
    result.verdicts.resize(task.tests.size());
    for (std::size_t i = 0; i < task.tests.size(); ++i) {
        result.verdicts[i] = run_test(code, task, task.tests[i], policy);
    }
    result.passed_all = !result.verdicts.empty() &&
                        std::all_of(result.verdicts.begin(), result.verdicts.end(),
                                    [](Verdict v) { return v == Verdict::Pass; });
    return result;
}

std::vector<CandidateResult> sample_candidates(const WorkflowIR& w, const std::map<std::string, AgentSpec>& agents,
                                               const TaskInstance& task, CompletionBackend& backend, int n,
                                               const SandboxPolicy& policy, const ExecutionOptions& options) {
    if (n < 1) {
        throw Error(ErrorCode::Domain, "sample_candidates needs n >= 1");
    }
    check_policy(policy);
    std::vector<std::string> outputs;
    outputs.reserve(static_cast<std::size_t>(n));
    const std::int64_t base = options.seed.value_or(0);
    for (int i = 0; i < n; ++i) {
        ExecutionOptions run_options = options;
        run_options.seed = base + i;
        outputs.push_back(execute_workflow(w, agents, task, backend, run_options).final_output);
    }

    std::vector<CandidateResult> results(outputs.size());
    parallel_for(outputs.size(), policy.parallelism, [&](std::size_t i) {
        std::string code;
        try {
            code = extract_code(outputs[i]);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoCodeFound) throw;
            CandidateResult failed;
            failed.verdicts.assign(task.tests.size(), Verdict::RuntimeError);
            results[i] = std::move(failed);
            return;
        }
        results[i] = run_candidate(code, task, policy);
    });
    return results;
}

}  // namespace sew
