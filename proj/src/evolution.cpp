#include "sew/evolution.hpp"

#include <algorithm>
#include <cctype>

#include "sew/prompts.hpp"

namespace sew {

namespace {

CompletionRequest make_request(std::string prompt, const EvolutionOptions& options) {
    CompletionRequest req;
    req.prompt = std::move(prompt);
    req.model = options.model;
    req.temperature = options.temperature;
    req.max_tokens = options.max_tokens;
    req.seed = options.seed;
    return req;
}

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

/// One operator call: `instruction ⊕ sep ⊕ payload`, rejecting blank answers.
Completion apply(std::string_view instruction, std::string_view payload, std::string_view role,
                 CompletionBackend& backend, const EvolutionOptions& options) {
    std::string prompt;
    prompt.reserve(instruction.size() + options.separator.size() + payload.size());
    prompt.append(instruction).append(options.separator).append(payload);
    Completion c = backend.complete(make_request(std::move(prompt), options), role);
    if (blank(c.response.text)) {
        throw Error(ErrorCode::EmptyCompletion, "backend returned an empty completion for " + std::string(role));
    }
    return c;
}

}  // namespace

std::string_view to_string(EvolutionMethod method) {
    switch (method) {
    case EvolutionMethod::DE1: return "DE1";
    case EvolutionMethod::DE2: return "DE2";
    case EvolutionMethod::HE0: return "HE0";
    case EvolutionMethod::HE1: return "HE1";
    }
    return "UNKNOWN";
}

std::optional<EvolutionMethod> method_from_string(std::string_view tag) {
    for (auto m : {EvolutionMethod::DE1, EvolutionMethod::DE2, EvolutionMethod::HE0, EvolutionMethod::HE1}) {
        if (to_string(m) == tag) {
            return m;
        }
    }
    return std::nullopt;
}

int calls_per_agent(EvolutionMethod method) {
    return method == EvolutionMethod::DE1 ? 1 : 2;
}

std::string_view to_string(LineageStep step) {
    switch (step) {
    case LineageStep::WorkflowGeneration: return "WORKFLOW_GEN";
    case LineageStep::WorkflowMutation: return "WORKFLOW_MUT";
    case LineageStep::AgentGeneration: return "AGENT_GEN";
    case LineageStep::DE1: return "DE1";
    case LineageStep::DE2: return "DE2";
    case LineageStep::HE0: return "HE0";
    case LineageStep::HE1: return "HE1";
    }
    return "UNKNOWN";
}

LineageStep lineage_step(EvolutionMethod method) {
    switch (method) {
    case EvolutionMethod::DE1: return LineageStep::DE1;
    case EvolutionMethod::DE2: return LineageStep::DE2;
    case EvolutionMethod::HE0: return LineageStep::HE0;
    case EvolutionMethod::HE1: return LineageStep::HE1;
    }
    return LineageStep::DE1;
}

EvolvedDoc generate_default_workflow(std::string_view task_desc, const WorkflowDoc& template_doc, Scheme scheme,
                                     CompletionBackend& backend, const EvolutionOptions& options) {
    const WorkflowDoc rendered = template_doc.scheme == scheme ? template_doc : transcode(template_doc, scheme);
    std::string prompt = prompts::fill(prompts::kWorkflowGeneration, "dataset_description", task_desc);
    prompt = prompts::fill(prompt, "workflow_template", rendered.text);
    Completion c = backend.complete(make_request(std::move(prompt), options), "workflow_generation");
    return {{std::move(c.response.text), scheme}, c.call_id};
}

EvolvedDoc evolve_workflow(const WorkflowDoc& w_def, std::string_view t_mut, CompletionBackend& backend,
                           const EvolutionOptions& options) {
    std::string prompt;
    prompt.append(t_mut).append(options.separator).append(w_def.text);
    Completion c = backend.complete(make_request(std::move(prompt), options), "workflow_evolution");
    return {{std::move(c.response.text), w_def.scheme}, c.call_id};
}

EvolvedAgent agent_de_first(const AgentSpec& agent, std::string_view t_mut, CompletionBackend& backend,
                            const EvolutionOptions& options) {
    Completion c = apply(t_mut, agent.prompt, "de1", backend, options);
    return {{agent.name, std::move(c.response.text)}, {c.call_id}};
}

EvolvedAgent agent_de_second(const AgentSpec& agent, std::string_view t_mut, CompletionBackend& backend,
                             const EvolutionOptions& options) {
    Completion first = apply(t_mut, agent.prompt, "de2", backend, options);
    Completion second = apply(t_mut, first.response.text, "de2", backend, options);
    return {{agent.name, std::move(second.response.text)}, {first.call_id, second.call_id}};
}

EvolvedAgent agent_he_zero(const AgentSpec& agent, std::string_view t_des, std::string_view t_think,
                           CompletionBackend& backend, const EvolutionOptions& options) {
    Completion mutation = apply(t_think, t_des, "he0:gen", backend, options);
    Completion applied = apply(mutation.response.text, agent.prompt, "he0:apply", backend, options);
    return {{agent.name, std::move(applied.response.text)}, {mutation.call_id, applied.call_id}};
}

EvolvedAgent agent_he_first(const AgentSpec& agent, std::string_view t_mut, std::string_view t_hmut,
                            CompletionBackend& backend, const EvolutionOptions& options) {
    Completion mutation = apply(t_hmut, t_mut, "he1:gen", backend, options);
    Completion applied = apply(mutation.response.text, agent.prompt, "he1:apply", backend, options);
    return {{agent.name, std::move(applied.response.text)}, {mutation.call_id, applied.call_id}};
}

std::vector<EvolvedAgent> generate_agent_prompts(const WorkflowIR& workflow, CompletionBackend& backend,
                                                 const EvolutionOptions& options) {
    const std::string rendered = serialize(workflow, options.agent_prompt_scheme).text;
    const std::string base = prompts::fill(prompts::kAgentGeneration, "workflow", rendered);
    std::vector<EvolvedAgent> out;
    for (const auto& name : agent_names(workflow)) {
        if (name.empty()) {
            throw Error(ErrorCode::MissingAgent, "workflow references an unnamed agent");
        }
        Completion c = backend.complete(make_request(prompts::fill(base, "agent_name", name), options),
                                        "agent_generation");
        if (blank(c.response.text)) {
            throw Error(ErrorCode::EmptyCompletion, "empty prompt generated for agent " + name);
        }
        out.push_back({{name, std::move(c.response.text)}, {c.call_id}});
    }
    return out;
}

InvalidWorkflowError::InvalidWorkflowError(Diagnosis diagnosis, WorkflowDoc doc)
    : Error(ErrorCode::InvalidWorkflow,
            std::holds_alternative<ParseFailure>(diagnosis)
                ? std::get<ParseFailure>(diagnosis).describe()
                : [&] {
                      std::string msg = "evolved workflow violates";
                      for (const auto& v : std::get<ValidityReport>(diagnosis).violations) {
                          msg += " " + std::string(to_string(v.rule)) + "@" + std::to_string(v.step_index);
                      }
                      return msg;
                  }()),
      diagnosis_(std::move(diagnosis)),
      doc_(std::move(doc)) {}

std::variant<WorkflowIR, InvalidWorkflowError::Diagnosis> check_workflow(const WorkflowDoc& doc,
                                                                         const CodeProducerNames& producers) {
    WorkflowIR ir;
    try {
        ir = parse({unwrap_fenced_document(doc.text), doc.scheme});
    } catch (const ParseError& e) {
        return InvalidWorkflowError::Diagnosis{e.failure()};
    }
    ValidityReport report = validate(ir, producers);
    if (!report.valid()) {
        return InvalidWorkflowError::Diagnosis{std::move(report)};
    }
    return ir;
}

SewResult run_sew(std::string_view task_desc, const WorkflowDoc& template_doc, Scheme scheme, EvolutionMethod method,
                  const PromptCorpus& corpus, const CorpusSelection& selection, CompletionBackend& backend,
                  const EvolutionOptions& options) {
    auto pick = [](const std::vector<std::string>& v, std::size_t id, std::string_view what) -> const std::string& {
        if (id >= v.size()) {
            throw Error(ErrorCode::Config, std::string(what) + " id " + std::to_string(id) + " out of range (" +
                                               std::to_string(v.size()) + " entries)");
        }
        return v[id];
    };
    const std::string& t_mut = pick(corpus.mutation_prompts, selection.mutation_prompt_id, "mutation prompt");
    const std::string& t_hmut =
        pick(corpus.hyper_mutation_prompts, selection.hyper_mutation_prompt_id, "hyper-mutation prompt");
    const std::string& t_think = pick(corpus.thinking_styles, selection.thinking_style_id, "thinking style");

    SewResult result;
    const std::string scheme_tag(to_string(scheme));

    // 1. Workflow generation.
    EvolvedDoc def = generate_default_workflow(task_desc, template_doc, scheme, backend, options);
    result.default_doc = def.doc;
    result.lineage.push_back({ArtifactKind::Workflow, scheme_tag, template_doc.text, def.doc.text,
                              LineageStep::WorkflowGeneration, std::nullopt, {def.call_id}});

    // 2. Workflow evolution.
    EvolvedDoc evolved = evolve_workflow(def.doc, t_mut, backend, options);
    result.evolved_doc = evolved.doc;
    result.lineage.push_back({ArtifactKind::Workflow, scheme_tag, def.doc.text, evolved.doc.text,
                              LineageStep::WorkflowMutation, selection.mutation_prompt_id, {evolved.call_id}});

    auto checked = check_workflow(evolved.doc, options.producers);
    if (auto* diagnosis = std::get_if<InvalidWorkflowError::Diagnosis>(&checked)) {
        throw InvalidWorkflowError(std::move(*diagnosis), evolved.doc);
    }
    result.workflow = std::get<WorkflowIR>(std::move(checked));

    // 3. Agent evolution.
    EvolutionOptions agent_options = options;
    agent_options.agent_prompt_scheme = scheme;
    const auto defaults = generate_agent_prompts(result.workflow, backend, agent_options);
    for (const auto& d : defaults) {
        result.lineage.push_back({ArtifactKind::Agent, d.agent.name, "", d.agent.prompt, LineageStep::AgentGeneration,
                                  std::nullopt, d.call_ids});
    }
    for (const auto& d : defaults) {
        EvolvedAgent e;
        std::optional<std::size_t> prompt_id;
        switch (method) {
        case EvolutionMethod::DE1:
            e = agent_de_first(d.agent, t_mut, backend, options);
            prompt_id = selection.mutation_prompt_id;
            break;
        case EvolutionMethod::DE2:
            e = agent_de_second(d.agent, t_mut, backend, options);
            prompt_id = selection.mutation_prompt_id;
            break;
        case EvolutionMethod::HE0:
            e = agent_he_zero(d.agent, task_desc, t_think, backend, options);
            prompt_id = selection.thinking_style_id;
            break;
        case EvolutionMethod::HE1:
            e = agent_he_first(d.agent, t_mut, t_hmut, backend, options);
            prompt_id = selection.hyper_mutation_prompt_id;
            break;
        }
        result.lineage.push_back({ArtifactKind::Agent, d.agent.name, d.agent.prompt, e.agent.prompt,
                                  lineage_step(method), prompt_id, e.call_ids});
        result.agents.push_back(std::move(e.agent));
    }
    return result;
}

}  // namespace sew
