#include "sew/prompts.hpp"

namespace sew::prompts {

const std::string_view kWorkflowGeneration =
    R"(You are an AI workflow designer. Your task is to create a detailed Agent Workflow tailored to the provided workflow template and dataset description. Please follow these steps:
1. Review the Workflow Template:
{workflow_template}
2. Analyze the Dataset Description:
{dataset_description}
3. Design the Agent Workflow: Based on the above information, develop a comprehensive Agent Workflow that includes:
- Inputs and Outputs: Define the types of input data and the expected output results.
- Steps and Sequence: Outline each step of the workflow and specify the order of execution.
- Agent Roles and Responsibilities: Describe the role and duties of the agent at each step.)";

const std::string_view kAgentGeneration =
    R"(You are an AI prompt engineer. Your task is to create specific prompts for each agent in the provided workflow. Please follow these steps:
1. Understand the Workflow: Here is the detailed workflow:
{workflow}
2. Identify Agent Roles: Based on the workflow, determine the distinct roles and responsibilities of each agent involved.
3. Generate Agent-Specific Prompts: For each identified agent, craft a clear and concise prompt that includes:
- Agent Role: A brief description of the agent's function within the workflow.
- Objectives: The specific goals the agent is expected to achieve.
- Inputs: The information or data the agent will receive.
- Outputs: The expected results or actions the agent should produce.
Write the prompt for the agent named {agent_name} only, and return nothing but that prompt.)";

const std::string_view kTaskParsingAgent =
    "You are a task parsing agent. Comprehensively summarize the given programming task for the subsequent code "
    "generation. You will NOT return anything except for the task summary.";

const std::string_view kCodeGenerationAgent =
    "You are a proficient Python programmer. Your task is to write Python code according to the summary parsed by "
    "your colleague. You will be given the problem description followed by the summary. You will NOT return "
    "anything except for the program.";

const std::string_view kCodeReviewerAgent =
    "You are a critical python code reviewer. You are tasked to label generated codes with 1 or 0, where 1 "
    "indicates that this code satisfies the requirements and can pass the sample test, \nwhile 0 indicates that "
    "this code doesn't satisfies the requirements and will fail the sample test. You will be given the Problem "
    "Description followed by the corresponding Generated Code. You will NOT return anything except for the "
    "numerical label.";

const std::string_view kCodeRewritingAgent =
    "You are a proficient Python programmer tasked with coding solutions based on given problem specifications. "
    "You just generated some codes that cannot pass the sample test. \nYou role is to regenerate python code that "
    "strictly adheres to the specifications, ensuring it reads input from standard input (stdin) and writes output "
    "to standard output (stdout). \nYou will be given the Problem Description followed by the Comments and Reasons "
    "why your previous code fails. You will NOT return anything except for the program.";

const std::string_view kLiveCodeBenchDescription =
    "The code generation task in LiveCodeBench involves generating correct and functional code from a natural "
    "language problem description, where the model is evaluated based on its ability to pass a set of unseen test "
    "cases.";

const std::string_view kHumanEvalDescription =
    "The HumanEval dataset, developed by OpenAI, comprises 164 handcrafted programming problems, each including a "
    "function signature, docstring, body, and multiple unit tests, designed to evaluate the code generation "
    "capabilities of large language models by assessing their ability to generate functionally correct code from "
    "docstrings.";

const std::string_view kMbppDescription =
    "The MBPP (Mostly Basic Python Problems) dataset comprises approximately 1,000 crowd-sourced Python programming "
    "problems, each including a task description, code solution, and three automated test cases, designed to be "
    "solvable by entry-level programmers and covering programming fundamentals and standard library "
    "functionality.";

std::string fill(std::string_view text, std::string_view key, std::string_view value) {
    const std::string needle = "{" + std::string(key) + "}";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = text.find(needle, pos);
        if (hit == std::string_view::npos) {
            out.append(text.substr(pos));
            return out;
        }
        out.append(text.substr(pos, hit - pos));
        out.append(value);
        pos = hit + needle.size();
    }
}

}  // namespace sew::prompts
