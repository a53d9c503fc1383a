#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sew/evaluation.hpp"

namespace sew {

struct DatasetConfig {
    std::string path;
    std::string format = "sew";
    std::string split;             // slice evaluated by `eval`
    std::string validation_split;  // slice scored by `search`
};

struct BackendConfig {
    std::string kind = "live";  // live | replay | scripted | echo
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double evolution_temperature = 0.7;
    double inference_temperature = 1.0;
    int max_tokens = 2048;
    int retries = 3;
    int timeout_seconds = 120;
    std::string transcript;      // replay source
    nlohmann::json script;       // scripted rule table (inline)
    std::string script_path;     // or a file holding it
};

struct WorkflowSource {
    std::string path;
    std::optional<Scheme> scheme;
    std::string agents_dir;
};

struct RunConfig {
    DatasetConfig dataset;
    std::string task_description;
    std::string dataset_id;
    std::string template_path;  // empty: the built-in five-step template
    std::optional<Scheme> template_scheme;
    std::vector<Scheme> schemes{Scheme::PySteps};
    std::string corpus_path;
    std::vector<std::size_t> mutation_prompt_ids{0};
    std::size_t hyper_mutation_prompt_id = 0;
    std::size_t thinking_style_id = 0;
    std::vector<EvolutionMethod> methods{EvolutionMethod::DE1};
    BackendConfig backend;
    SandboxPolicy sandbox;
    int n = 10;
    std::vector<int> ks{1, 5, 10};
    int max_iterations = 3;
    std::string output_dir = "runs/latest";
    std::int64_t seed = 0;
    WorkflowSource workflow;
};

/// Relative paths resolve against `base_dir`. Throws Error(Config) on
/// unknown keys, bad values or referenced files that do not exist.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::string& path);

/// Resolved settings without output_dir, in a stable key order.
nlohmann::json resolved_json(const RunConfig& config);
/// Hex SHA-256 of the compact resolved JSON.
std::string config_fingerprint(const RunConfig& config);

/// The five-step parse / refine / generate / review / refine template.
WorkflowIR default_template_ir();

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& config);

/// Task description from `task_description`, else `dataset_id` looked up
/// in the corpus and then among the built-in benchmark descriptions.
std::string resolve_task_description(const RunConfig& config, const PromptCorpus* corpus);

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitConfig = 2,
    kExitBackend = 3,
    kExitInvalidWorkflow = 4,
    kExitSandbox = 5,
};

int exit_code_for(const Error& e);

/// Commands write their artifacts under config.output_dir and throw on
/// failure; run_command maps failures to exit codes.
void cmd_generate(const RunConfig& config, CompletionBackend& backend, std::ostream& log);
void cmd_evolve(const RunConfig& config, CompletionBackend& backend, std::ostream& log);
void cmd_eval(const RunConfig& config, CompletionBackend& backend, bool baseline, std::ostream& log);
void cmd_search(const RunConfig& config, CompletionBackend& backend, std::ostream& log);

/// Runs `command` (generate | evolve | eval | search). A null backend is
/// built from the config. The transcript is written even when the command
/// fails.
int run_command(const std::string& command, const RunConfig& config, bool baseline, CompletionBackend* backend,
                std::ostream& log);

/// Loads an evaluable workflow: a document (any scheme, fenced or not) plus
/// one `<agent>.prompt.txt` per agent from `agents_dir`.
std::pair<WorkflowIR, std::vector<AgentSpec>> load_workflow(const WorkflowSource& source);

}  // namespace sew
