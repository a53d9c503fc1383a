#include <fstream>
#include <iostream>
#include <sstream>

#include "sew/cli.hpp"

namespace sew {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, std::string_view text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error(ErrorCode::Config, "cannot write " + path.string());
    }
}

std::string read_text(const fs::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Config, "cannot open " + std::string(what) + " '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string pretty(const json& j) {
    return j.dump(2) + "\n";
}

Scheme scheme_for_path(const fs::path& path, const std::optional<Scheme>& declared) {
    if (declared) return *declared;
    std::string ext = path.extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    if (auto s = scheme_from_string(ext)) return *s;
    throw Error(ErrorCode::Config, "cannot infer the scheme of '" + path.string() + "'; set it explicitly");
}

WorkflowDoc load_template(const RunConfig& config) {
    if (config.template_path.empty()) {
        return serialize(default_template_ir(), config.template_scheme.value_or(Scheme::PySteps));
    }
    const fs::path p(config.template_path);
    return {read_text(p, "template"), scheme_for_path(p, config.template_scheme)};
}

PromptCorpus require_corpus(const RunConfig& config) {
    if (config.corpus_path.empty()) {
        throw Error(ErrorCode::Config, "corpus.path is required for this command");
    }
    return load_corpus(config.corpus_path);
}

EvolutionOptions evolution_options(const RunConfig& config) {
    EvolutionOptions o;
    o.model = config.backend.model;
    o.temperature = config.backend.evolution_temperature;
    o.max_tokens = config.backend.max_tokens;
    o.seed = config.seed;
    return o;
}

EvalSettings eval_settings(const RunConfig& config, std::string_view split) {
    EvalSettings s;
    s.n = config.n;
    s.ks = config.ks;
    s.sandbox = config.sandbox;
    s.execution.model = config.backend.model;
    s.execution.temperature = config.backend.inference_temperature;
    s.execution.max_tokens = config.backend.max_tokens;
    s.execution.seed = config.seed;
    s.execution.loop.max_iterations = config.max_iterations;
    s.task_set_id = fs::path(config.dataset.path).stem().string() + (split.empty() ? "" : "[" + std::string(split) + "]");
    s.config_fingerprint = config_fingerprint(config);
    return s;
}

std::vector<TaskInstance> require_tasks(const RunConfig& config, std::string_view split) {
    if (config.dataset.path.empty()) {
        throw Error(ErrorCode::Config, "dataset.path is required for this command");
    }
    auto tasks = load_tasks(config.dataset.path, config.dataset.format, split);
    if (tasks.empty()) {
        throw Error(ErrorCode::Config, "dataset split '" + std::string(split) + "' selects no tasks");
    }
    return tasks;
}

json lineage_json(const EvolvedArtifact& a) {
    return {{"kind", a.kind == ArtifactKind::Workflow ? "WORKFLOW" : "AGENT"},
            {"subject", a.subject},
            {"method", to_string(a.method)},
            {"prompt_id", a.prompt_id ? json(*a.prompt_id) : json(nullptr)},
            {"call_ids", a.call_ids},
            {"before", a.before},
            {"after", a.after}};
}

void write_sew_result(const fs::path& dir, const SewResult& r, Scheme scheme) {
    const std::string ext(scheme_extension(scheme));
    write_text(dir / "workflows" / ("default." + ext), r.default_doc.text);
    write_text(dir / "workflows" / ("evolved." + ext), r.evolved_doc.text);
    for (const auto& a : r.agents) {
        write_text(dir / "agents" / (a.name + ".prompt.txt"), a.prompt);
    }
    std::string lineage;
    for (const auto& a : r.lineage) {
        lineage += lineage_json(a).dump() + "\n";
    }
    write_text(dir / "lineage.jsonl", lineage);
}

void print_diagnosis(std::ostream& log, const InvalidWorkflowError::Diagnosis& d) {
    if (const auto* f = std::get_if<ParseFailure>(&d)) {
        log << "parse failure: " << f->describe() << "\n";
        return;
    }
    for (const auto& v : std::get<ValidityReport>(d).violations) {
        log << "  " << to_string(v.rule) << " at step " << v.step_index << ": " << v.detail << "\n";
    }
}

}  // namespace

std::pair<WorkflowIR, std::vector<AgentSpec>> load_workflow(const WorkflowSource& source) {
    if (source.path.empty()) {
        throw Error(ErrorCode::Config, "workflow.path is required");
    }
    const fs::path path(source.path);
    const WorkflowDoc doc{read_text(path, "workflow"), scheme_for_path(path, source.scheme)};
    auto checked = check_workflow(doc);
    if (auto* d = std::get_if<InvalidWorkflowError::Diagnosis>(&checked)) {
        throw InvalidWorkflowError(std::move(*d), doc);
    }
    WorkflowIR ir = std::get<WorkflowIR>(std::move(checked));
    const fs::path agents_dir = source.agents_dir.empty() ? path.parent_path() / "agents" : fs::path(source.agents_dir);
    std::vector<AgentSpec> agents;
    for (const auto& name : agent_names(ir)) {
        const fs::path file = agents_dir / (name + ".prompt.txt");
        if (!fs::exists(file)) {
            throw Error(ErrorCode::MissingAgent, "no prompt file for agent '" + name + "': " + file.string());
        }
        agents.push_back({name, read_text(file, "agent prompt")});
    }
    return {std::move(ir), std::move(agents)};
}

int exit_code_for(const Error& e) {
    if (e.is_backend_error()) return kExitBackend;
    switch (e.code()) {
    case ErrorCode::InvalidWorkflow: return kExitInvalidWorkflow;
    case ErrorCode::SandboxSetup: return kExitSandbox;
    case ErrorCode::Config:
    case ErrorCode::Domain:
    case ErrorCode::EmptyInput:
    case ErrorCode::MissingAgent:
    case ErrorCode::Unbound:
    case ErrorCode::Unserializable: return kExitConfig;
    default: return kExitInternal;
    }
}

void cmd_generate(const RunConfig& config, CompletionBackend& backend, std::ostream& log) {
    const fs::path out(config.output_dir);
    std::optional<PromptCorpus> corpus;
    if (!config.corpus_path.empty()) corpus = load_corpus(config.corpus_path);
    const std::string task_desc = resolve_task_description(config, corpus ? &*corpus : nullptr);
    const WorkflowDoc tmpl = load_template(config);
    for (Scheme scheme : config.schemes) {
        EvolvedDoc d = generate_default_workflow(task_desc, tmpl, scheme, backend, evolution_options(config));
        const fs::path file = out / "workflows" / ("default." + std::string(scheme_extension(scheme)));
        write_text(file, d.doc.text);
        log << "wrote " << file.string() << "\n";
    }
}

void cmd_evolve(const RunConfig& config, CompletionBackend& backend, std::ostream& log) {
    const fs::path out(config.output_dir);
    const PromptCorpus corpus = require_corpus(config);
    const std::string task_desc = resolve_task_description(config, &corpus);
    const Scheme scheme = config.schemes.front();
    const EvolutionMethod method = config.methods.front();
    const CorpusSelection selection{config.mutation_prompt_ids.front(), config.hyper_mutation_prompt_id,
                                    config.thinking_style_id};
    try {
        SewResult r = run_sew(task_desc, load_template(config), scheme, method, corpus, selection, backend,
                              evolution_options(config));
        write_sew_result(out, r, scheme);
        log << "evolved " << r.workflow.steps.size() << "-step workflow with " << r.agents.size() << " agents ("
            << to_string(method) << ") into " << out.string() << "\n";
    } catch (const InvalidWorkflowError& e) {
        write_text(out / "workflows" / ("evolved." + std::string(scheme_extension(scheme))), e.doc().text);
        throw;
    }
}

void cmd_eval(const RunConfig& config, CompletionBackend& backend, bool baseline, std::ostream& log) {
    const fs::path out(config.output_dir);
    const auto tasks = require_tasks(config, config.dataset.split);
    const EvalSettings settings = eval_settings(config, config.dataset.split);
    EvalReport report;
    if (baseline) {
        report = baseline_single_agent(tasks, backend, settings);
    } else {
        auto [ir, agents] = load_workflow(config.workflow);
        report = evaluate(ir, agents, tasks, backend, settings);
    }
    write_text(out / "report.json", pretty(to_json(report)));
    write_text(out / "report.csv", to_csv(report));
    write_text(out / "tokens.json", pretty(to_json(report.token_totals)));
    for (const auto& [k, v] : report.pass_at) {
        log << "pass@" << k << " = " << v << "\n";
    }
    if (report.warnings) {
        log << report.warnings << " task(s) dropped after backend failures\n";
    }
}

void cmd_search(const RunConfig& config, CompletionBackend& backend, std::ostream& log) {
    const fs::path out = fs::path(config.output_dir) / "search";
    SearchConfig sc;
    sc.corpus = require_corpus(config);
    sc.task_desc = resolve_task_description(config, &sc.corpus);
    sc.schemes = config.schemes;
    sc.mutation_prompt_ids = config.mutation_prompt_ids;
    sc.methods = config.methods;
    sc.template_doc = load_template(config);
    sc.hyper_mutation_prompt_id = config.hyper_mutation_prompt_id;
    sc.thinking_style_id = config.thinking_style_id;
    sc.evolution = evolution_options(config);
    sc.eval = eval_settings(config, config.dataset.validation_split);
    const auto tasks = require_tasks(config, config.dataset.validation_split);

    const SearchResult result = search(sc, tasks, backend);

    std::string records;
    int invalid = 0, failed = 0, scored = 0;
    for (const auto& r : result.records) {
        records += to_json(r).dump() + "\n";
        const fs::path point = out / r.artifact_path;
        if (r.result) {
            write_sew_result(point, *r.result, r.scheme);
        } else if (r.evolved_doc) {
            write_text(point / "workflows" / ("evolved." + std::string(scheme_extension(r.scheme))),
                       r.evolved_doc->text);
        }
        if (r.validity && !std::holds_alternative<ValidityReport>(*r.validity)) ++invalid;
        else if (r.validity && !std::get<ValidityReport>(*r.validity).valid()) ++invalid;
        if (r.error) ++failed;
        if (r.validation_score) ++scored;
    }
    write_text(out / "records.jsonl", records);
    write_text(out / "rates.csv", rates_csv(result.rate_reports));
    write_text(out / "methods.csv", methods_csv(result.records));

    json rates = json::array();
    for (const auto& [scheme, rr] : result.rate_reports) rates.push_back(to_json(rr));
    json summary{{"grid_points", result.records.size()},
                 {"scored", scored},
                 {"invalid", invalid},
                 {"failed", failed},
                 {"rate_reports", rates},
                 {"config_fingerprint", sc.eval.config_fingerprint},
                 {"best", nullptr}};

    if (result.best) {
        const SearchRecord& best = result.records[*result.best];
        const SewResult& r = *best.result;
        const std::string ext(scheme_extension(best.scheme));
        write_text(out / "best" / ("workflow." + ext), serialize(r.workflow, best.scheme).text);
        for (const auto& a : r.agents) {
            write_text(out / "best" / "agents" / (a.name + ".prompt.txt"), a.prompt);
        }
        write_text(out / "best" / "record.json", pretty(to_json(best)));
        summary["best"] = {{"point", point_label(best.scheme, best.mutation_prompt_id, best.method)},
                           {"validation_score", *best.validation_score},
                           {"tokens", best.tokens}};
        log << "best: " << point_label(best.scheme, best.mutation_prompt_id, best.method)
            << " pass@1=" << *best.validation_score << "\n";
    } else {
        log << "no grid point produced a scored workflow\n";
    }
    write_text(out / "summary.json", pretty(summary));
    log << result.records.size() << " grid points, " << invalid << " invalid, " << failed << " failed\n";
}

int run_command(const std::string& command, const RunConfig& config, bool baseline, CompletionBackend* backend,
                std::ostream& log) {
    std::unique_ptr<CompletionBackend> owned;
    int code = kExitOk;
    try {
        if (command != "generate" && command != "evolve" && command != "eval" && command != "search") {
            throw Error(ErrorCode::Config, "unknown command '" + command + "'");
        }
        const fs::path out(config.output_dir);
        fs::create_directories(out);
        write_text(out / "config.resolved.json",
                   pretty({{"config_fingerprint", config_fingerprint(config)}, {"config", resolved_json(config)}}));
        if (!backend) {
            owned = make_backend(config);
            backend = owned.get();
        }
        if (command == "generate") cmd_generate(config, *backend, log);
        else if (command == "evolve") cmd_evolve(config, *backend, log);
        else if (command == "eval") cmd_eval(config, *backend, baseline, log);
        else cmd_search(config, *backend, log);
    } catch (const InvalidWorkflowError& e) {
        log << "error: " << e.what() << "\n";
        print_diagnosis(log, e.diagnosis());
        code = kExitInvalidWorkflow;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        code = exit_code_for(e);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        code = kExitInternal;
    }
    if (backend) {
        try {
            write_transcript((fs::path(config.output_dir) / "transcript.jsonl").string(),
                             backend->transcript().records());
        } catch (const std::exception& e) {
            log << "error: " << e.what() << "\n";
            if (code == kExitOk) code = kExitConfig;
        }
    }
    return code;
}

}  // namespace sew
