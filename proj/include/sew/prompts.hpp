#pragma once

#include <string>
#include <string_view>

namespace sew::prompts {

/// Workflow designer prompt. Placeholders: {workflow_template}, {dataset_description}.
extern const std::string_view kWorkflowGeneration;

/// Prompt engineer prompt. Placeholders: {workflow}, {agent_name}.
extern const std::string_view kAgentGeneration;

// Un-evolved agent prompts of the task-parsing and code-rewriting workflows.
extern const std::string_view kTaskParsingAgent;
extern const std::string_view kCodeGenerationAgent;
extern const std::string_view kCodeReviewerAgent;
extern const std::string_view kCodeRewritingAgent;

// Dataset descriptions used as the task description input.
extern const std::string_view kLiveCodeBenchDescription;
extern const std::string_view kHumanEvalDescription;
extern const std::string_view kMbppDescription;

/// Replaces every `{key}` occurrence with `value`.
std::string fill(std::string_view text, std::string_view key, std::string_view value);

}  // namespace sew::prompts
