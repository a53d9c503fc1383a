#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sew {

enum class Scheme { Bpmn, Core, PySteps, Yaml, Pseudo };

/// The external input every workflow may reference.
inline constexpr std::string_view kTaskDescription = "task_description";

/// One agent invocation: `output = name(args...)`.
struct StepSpec {
    std::string name;
    std::vector<std::string> args;
    std::string output;

    bool operator==(const StepSpec&) const = default;
};

/// Linear, def-before-use pipeline of agent steps. Every textual scheme
/// parses into this type.
struct WorkflowIR {
    std::vector<StepSpec> steps;
    std::optional<Scheme> scheme_hint;

    /// Equality ignores the scheme hint.
    bool operator==(const WorkflowIR& other) const { return steps == other.steps; }
};

struct AgentSpec {
    std::string name;
    std::string prompt;

    bool operator==(const AgentSpec&) const = default;
};

enum class Rule { Empty, DuplicateOutput, UnboundArg, NonterminalCoder, BadToken };

std::string_view to_string(Rule rule);

struct Violation {
    Rule rule;
    int step_index;  // -1 for workflow-level violations
    std::string detail;

    bool operator==(const Violation&) const = default;
};

struct ValidityReport {
    std::vector<Violation> violations;

    bool valid() const { return violations.empty(); }
    bool has(Rule rule) const;
    bool operator==(const ValidityReport&) const = default;
};

/// Names treated as code producers when checking the terminal step.
struct CodeProducerNames {
    std::vector<std::string> substrings{"code_generation", "code_refinement", "code_rewriting"};

    bool matches(std::string_view agent_name) const;
};

/// True for `[a-z][a-z0-9_]*`.
bool is_identifier(std::string_view token);

/// Checks every structural rule and reports all violations, ordered by step.
ValidityReport validate(const WorkflowIR& workflow, const CodeProducerNames& producers = {});

/// Execution order of a validated pipeline. Throws Error(Unbound) when
/// def-before-use fails or the workflow is empty or has duplicate outputs.
std::vector<std::size_t> topo_order(const WorkflowIR& workflow);

/// Distinct agent names in first-appearance order.
std::vector<std::string> agent_names(const WorkflowIR& workflow);

}  // namespace sew
