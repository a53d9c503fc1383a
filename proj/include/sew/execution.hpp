#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sew/backend.hpp"
#include "sew/errors.hpp"
#include "sew/workflow.hpp"

namespace sew {

enum class TestKind { Stdio, Functional };

struct TestCase {
    TestKind kind = TestKind::Stdio;
    std::string input;     // stdin payload, or a Python argument list "1, 'a'"
    std::string expected;  // stdout, or a Python expression for the return value
};

struct TaskInstance {
    std::string id;
    std::string description;
    std::vector<TestCase> tests;
    std::optional<std::string> entry_point;
};

/// Throws Error(Config) unless the task has tests, functional tests come
/// with an entry point and stdio tests come without one.
void check_task(const TaskInstance& task);

/// Dataset loaders. `format` is one of sew, humaneval, mbpp, livecodebench.
/// `split` selects a half-open slice "start:end" of the file (either side
/// may be empty); an empty split keeps everything.
std::vector<TaskInstance> load_tasks(const std::string& path, std::string_view format = "sew",
                                     std::string_view split = {});
std::vector<TaskInstance> parse_tasks(std::string_view jsonl, std::string_view format = "sew");
nlohmann::json to_json(const TaskInstance& task);

struct SandboxPolicy {
    std::vector<std::string> interpreter_command{"python3"};
    /// Run with the solution path appended; a non-zero exit means the
    /// candidate does not compile. Empty disables the pre-pass.
    std::vector<std::string> syntax_check_command{
        "python3", "-c", "import sys; compile(open(sys.argv[1], encoding='utf-8').read(), sys.argv[1], 'exec')"};
    std::int64_t wall_timeout_ms = 10000;
    std::size_t max_output_bytes = 1 << 20;
    bool workdir_isolation = true;
    int parallelism = 4;
};

/// Throws Error(Config) on a non-positive timeout/output bound or an empty
/// interpreter command.
void check_policy(const SandboxPolicy& policy);

struct LoopPolicy {
    int max_iterations = 3;
};

struct ExecutionOptions {
    std::string separator = "\n\n";
    std::string model = "gpt-4o-mini";
    double temperature = 1.0;
    int max_tokens = 2048;
    std::optional<std::int64_t> seed;
    LoopPolicy loop{};
};

struct StepTrace {
    std::size_t step_index = 0;
    std::string agent_name;
    std::string assembled_prompt;
    std::string completion_text;
    std::map<std::string, std::string> bindings_after;
};

struct WorkflowRun {
    std::string final_output;
    std::vector<StepTrace> traces;
};

/// agent.prompt ⊕ sep ⊕ "== arg ==\nvalue" sections joined by sep.
std::string assemble_prompt(const AgentSpec& agent, const StepSpec& step,
                            const std::map<std::string, std::string>& bindings,
                            std::string_view separator = "\n\n");

/// Runs the steps in order with one backend call each. A reviewer step
/// (code_review*) directly followed by a rewriter (code_rewrit*/code_refine*)
/// forms a loop: the rewriter runs unless the reviewer answers "1", and the
/// pair is re-entered while the reviewer answers "0", for at most
/// loop.max_iterations rewrites.
WorkflowRun execute_workflow(const WorkflowIR& w, const std::map<std::string, AgentSpec>& agents,
                             const TaskInstance& task, CompletionBackend& backend,
                             const ExecutionOptions& options = {});

std::map<std::string, AgentSpec> agent_map(const std::vector<AgentSpec>& agents);

/// Last fenced block, else the whole text when its first non-blank line
/// looks like code, else Error(NoCodeFound).
std::string extract_code(std::string_view completion);

enum class Verdict { Pass, WrongOutput, RuntimeError, Timeout, SyntaxError, OutputOverflow };

std::string_view to_string(Verdict v);

struct CandidateResult {
    std::string code;
    std::vector<Verdict> verdicts;
    bool passed_all = false;
    bool extracted = false;     // extract_code succeeded
    bool syntax_valid = false;  // the pre-pass accepted the code
};

/// Trailing whitespace stripped per line, trailing blank lines dropped.
std::string normalize_stdout(std::string_view text);

CandidateResult run_candidate(const std::string& code, const TaskInstance& task, const SandboxPolicy& policy);

/// n independent workflow runs (seed = options.seed + i), then each final
/// output through extract_code + run_candidate. Workflow runs are sequential
/// so transcripts stay ordered; sandbox runs use policy.parallelism.
std::vector<CandidateResult> sample_candidates(const WorkflowIR& w, const std::map<std::string, AgentSpec>& agents,
                                               const TaskInstance& task, CompletionBackend& backend, int n,
                                               const SandboxPolicy& policy, const ExecutionOptions& options = {});

}  // namespace sew
