#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sew/evolution.hpp"
#include "sew/execution.hpp"

namespace sew {

/// Unbiased pass@k: 1 - C(n-c, k) / C(n, k), evaluated as a running
/// product. Exactly 1 when c > n - k. Throws Error(Domain) outside
/// n >= 1, 0 <= c <= n, 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct RateVariant {
    WorkflowDoc doc;
    /// Absent when no document was obtained (the generation call failed).
    std::optional<InvalidWorkflowError::Diagnosis> validity;
    bool executed_ok = false;

    bool valid() const;
};

struct RateReport {
    Scheme scheme = Scheme::PySteps;
    std::size_t total_variants = 0;
    std::size_t valid_count = 0;
    std::size_t executable_count = 0;
    double lsr = 0.0;
    double gsr = 0.0;
};

/// Executable variants count only when also valid, so gsr <= lsr.
/// Throws Error(EmptyInput) on an empty list.
RateReport compute_rates(const std::vector<RateVariant>& variants);

struct TaskTally {
    int n = 0;
    int c = 0;
    bool operator==(const TaskTally&) const = default;
};

struct EvalReport {
    std::string task_set_id;
    std::map<std::string, TaskTally> per_task;
    std::map<int, double> pass_at;
    TokenTotals token_totals;
    std::string config_fingerprint;
    int warnings = 0;                       // tasks dropped after backend failures
    std::size_t candidates = 0;             // candidates sampled over all tasks
    std::size_t executable_candidates = 0;  // extractable and syntax-valid
};

struct EvalSettings {
    int n = 10;
    std::vector<int> ks{1, 5, 10};
    SandboxPolicy sandbox{};
    ExecutionOptions execution{};
    std::string task_set_id = "tasks";
    std::string config_fingerprint;
};

/// Samples n candidates per task and averages pass@k over tasks. A task
/// whose workflow run hits a backend error is kept with n = 0, excluded
/// from the means and counted in `warnings`. SandboxSetup propagates.
EvalReport evaluate(const WorkflowIR& w, const std::vector<AgentSpec>& agents, const std::vector<TaskInstance>& tasks,
                    CompletionBackend& backend, const EvalSettings& settings);

/// One code_generation_agent step fed the raw task description.
WorkflowIR baseline_workflow();
std::vector<AgentSpec> baseline_agents();

EvalReport baseline_single_agent(const std::vector<TaskInstance>& tasks, CompletionBackend& backend,
                                 const EvalSettings& settings);

nlohmann::json to_json(const TokenTotals& totals);
nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const RateReport& report);
/// Header `task_id,n,c` then one row per task.
std::string to_csv(const EvalReport& report);

/// Side-by-side reports keyed by label (e.g. "sew", "baseline").
nlohmann::json merge_reports(const std::map<std::string, EvalReport>& reports);
/// Header `label,k,pass` then one row per label and k.
std::string merged_csv(const std::map<std::string, EvalReport>& reports);

struct SearchConfig {
    std::vector<Scheme> schemes;
    std::vector<std::size_t> mutation_prompt_ids;
    std::vector<EvolutionMethod> methods;
    WorkflowDoc template_doc;
    std::string task_desc;
    PromptCorpus corpus;
    std::size_t hyper_mutation_prompt_id = 0;
    std::size_t thinking_style_id = 0;
    EvolutionOptions evolution{};
    EvalSettings eval{};
};

struct SearchRecord {
    Scheme scheme = Scheme::PySteps;
    std::size_t mutation_prompt_id = 0;
    EvolutionMethod method = EvolutionMethod::DE1;
    std::optional<WorkflowDoc> evolved_doc;
    std::optional<InvalidWorkflowError::Diagnosis> validity;
    std::optional<std::string> error;  // grid-point failure other than validity
    std::optional<double> validation_score;
    std::map<int, double> pass_at;
    bool executed_ok = false;
    std::int64_t tokens = 0;
    std::string artifact_path;
    std::optional<SewResult> result;  // kept for valid points
};

struct SearchResult {
    std::vector<SearchRecord> records;
    std::optional<std::size_t> best;  // index into records
    std::map<Scheme, RateReport> rate_reports;
};

/// Exhaustive sweep over schemes x mutation prompts x methods. Valid points
/// are scored by validation pass@1; best = highest score, then fewer tokens,
/// then lexicographic (scheme, prompt id, method). Point failures are
/// recorded and never abort the sweep, except SandboxSetup.
SearchResult search(const SearchConfig& config, const std::vector<TaskInstance>& validation_tasks,
                    CompletionBackend& backend);

std::string point_label(Scheme scheme, std::size_t mutation_prompt_id, EvolutionMethod method);
nlohmann::json to_json(const SearchRecord& record);
nlohmann::json diagnosis_json(const InvalidWorkflowError::Diagnosis& diagnosis);
/// scheme,total,valid,executable,lsr,gsr
std::string rates_csv(const std::map<Scheme, RateReport>& reports);
/// workflow_fixture,method,pass@1,pass@5,pass@10
std::string methods_csv(const std::vector<SearchRecord>& records);

}  // namespace sew
