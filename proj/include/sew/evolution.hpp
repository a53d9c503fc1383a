#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sew/backend.hpp"
#include "sew/errors.hpp"
#include "sew/representations.hpp"
#include "sew/workflow.hpp"

namespace sew {

/// Mutation, hyper-mutation and thinking-style prompts plus per-dataset task
/// descriptions. IDs are zero-based positions within each section.
struct PromptCorpus {
    std::vector<std::string> mutation_prompts;
    std::vector<std::string> hyper_mutation_prompts;
    std::vector<std::string> thinking_styles;
    std::map<std::string, std::string> task_descriptions;
};

/// Reads the sectioned corpus format (see docs/formats/corpus.md).
/// Throws Error(Config) on malformed input or empty sections.
PromptCorpus parse_corpus(std::string_view text);
PromptCorpus load_corpus(const std::string& path);

enum class EvolutionMethod { DE1, DE2, HE0, HE1 };

std::string_view to_string(EvolutionMethod method);
std::optional<EvolutionMethod> method_from_string(std::string_view tag);
/// Backend calls per agent: DE1 = 1, DE2 = HE0 = HE1 = 2.
int calls_per_agent(EvolutionMethod method);

/// Generation/evolution call settings. Defaults follow the evolution
/// decoding settings (temperature 0.7).
struct EvolutionOptions {
    std::string separator = "\n\n";
    std::string model = "gpt-4o-mini";
    double temperature = 0.7;
    int max_tokens = 2048;
    std::optional<std::int64_t> seed;
    /// Scheme used when rendering an IR inside the agent-generation prompt.
    Scheme agent_prompt_scheme = Scheme::PySteps;
    CodeProducerNames producers{};
};

struct EvolvedDoc {
    WorkflowDoc doc;
    CallId call_id;
};

struct EvolvedAgent {
    AgentSpec agent;
    std::vector<CallId> call_ids;
};

/// Workflow generation from a template and a task description (one call).
/// The completion is returned unparsed.
EvolvedDoc generate_default_workflow(std::string_view task_desc, const WorkflowDoc& template_doc, Scheme scheme,
                                     CompletionBackend& backend, const EvolutionOptions& options = {});

/// W' = F(W_def | T_mut): one call on `t_mut ⊕ sep ⊕ w_def`.
EvolvedDoc evolve_workflow(const WorkflowDoc& w_def, std::string_view t_mut, CompletionBackend& backend,
                           const EvolutionOptions& options = {});

/// a' = F(a | T_mut).
EvolvedAgent agent_de_first(const AgentSpec& agent, std::string_view t_mut, CompletionBackend& backend,
                            const EvolutionOptions& options = {});

/// a'' = F(F(a | T_mut) | T_mut).
EvolvedAgent agent_de_second(const AgentSpec& agent, std::string_view t_mut, CompletionBackend& backend,
                             const EvolutionOptions& options = {});

/// a' = H(a | H(T_des | T_think)): synthesize a mutation prompt from the
/// thinking style and the task description, then apply it.
EvolvedAgent agent_he_zero(const AgentSpec& agent, std::string_view t_des, std::string_view t_think,
                           CompletionBackend& backend, const EvolutionOptions& options = {});

/// a'' = H(a | H(T_mut | T_hmut)): mutate the mutation prompt, then apply it.
EvolvedAgent agent_he_first(const AgentSpec& agent, std::string_view t_mut, std::string_view t_hmut,
                            CompletionBackend& backend, const EvolutionOptions& options = {});

/// One prompt-engineer call per distinct agent name, in step order.
std::vector<EvolvedAgent> generate_agent_prompts(const WorkflowIR& workflow, CompletionBackend& backend,
                                                 const EvolutionOptions& options = {});

struct CorpusSelection {
    std::size_t mutation_prompt_id = 0;
    std::size_t hyper_mutation_prompt_id = 0;
    std::size_t thinking_style_id = 0;
};

enum class ArtifactKind { Workflow, Agent };

/// What produced a lineage entry.
enum class LineageStep { WorkflowGeneration, WorkflowMutation, AgentGeneration, DE1, DE2, HE0, HE1 };

std::string_view to_string(LineageStep step);
LineageStep lineage_step(EvolutionMethod method);

struct EvolvedArtifact {
    ArtifactKind kind;
    std::string subject;  // agent name, or the scheme tag for workflows
    std::string before;
    std::string after;
    LineageStep method;
    std::optional<std::size_t> prompt_id;  // corpus index of the prompt used, if any
    std::vector<CallId> call_ids;
};

struct SewResult {
    WorkflowDoc default_doc;
    WorkflowDoc evolved_doc;
    WorkflowIR workflow;
    std::vector<AgentSpec> agents;
    std::vector<EvolvedArtifact> lineage;
};

/// W' failed to parse or validate.
class InvalidWorkflowError : public Error {
public:
    using Diagnosis = std::variant<ValidityReport, ParseFailure>;

    InvalidWorkflowError(Diagnosis diagnosis, WorkflowDoc doc);

    const Diagnosis& diagnosis() const noexcept { return diagnosis_; }
    const WorkflowDoc& doc() const noexcept { return doc_; }

private:
    Diagnosis diagnosis_;
    WorkflowDoc doc_;
};

/// Parses (after unwrapping a fenced block) and validates an evolved
/// document. Returns the diagnosis on failure.
std::variant<WorkflowIR, InvalidWorkflowError::Diagnosis> check_workflow(const WorkflowDoc& doc,
                                                                         const CodeProducerNames& producers = {});

/// The full self-evolving pass: generate, evolve, validate, generate agent
/// prompts, evolve every agent with `method`.
SewResult run_sew(std::string_view task_desc, const WorkflowDoc& template_doc, Scheme scheme, EvolutionMethod method,
                  const PromptCorpus& corpus, const CorpusSelection& selection, CompletionBackend& backend,
                  const EvolutionOptions& options = {});

}  // namespace sew
