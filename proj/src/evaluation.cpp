#include "sew/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>
#include <tuple>

#include "sew/prompts.hpp"

namespace sew {

namespace {

using nlohmann::json;

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

double pass_at_k(int n, int c, int k) {
    if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
        throw Error(ErrorCode::Domain, "pass@k needs n >= 1, 0 <= c <= n, 1 <= k <= n (got n=" + std::to_string(n) +
                                           ", c=" + std::to_string(c) + ", k=" + std::to_string(k) + ")");
    }
    if (n - c < k) {
        return 1.0;
    }
    // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
    double miss = 1.0;
    for (int i = n - c + 1; i <= n; ++i) {
        miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
    }
    return 1.0 - miss;
}

bool RateVariant::valid() const {
    if (!validity) return false;
    const auto* report = std::get_if<ValidityReport>(&*validity);
    return report && report->valid();
}

RateReport compute_rates(const std::vector<RateVariant>& variants) {
    if (variants.empty()) {
        throw Error(ErrorCode::EmptyInput, "compute_rates needs at least one variant");
    }
    RateReport r;
    r.scheme = variants.front().doc.scheme;
    r.total_variants = variants.size();
    for (const auto& v : variants) {
        if (v.valid()) {
            ++r.valid_count;
            if (v.executed_ok) ++r.executable_count;
        }
    }
    r.lsr = static_cast<double>(r.valid_count) / static_cast<double>(r.total_variants);
    r.gsr = static_cast<double>(r.executable_count) / static_cast<double>(r.total_variants);
    return r;
}

EvalReport evaluate(const WorkflowIR& w, const std::vector<AgentSpec>& agents, const std::vector<TaskInstance>& tasks,
                    CompletionBackend& backend, const EvalSettings& settings) {
    if (settings.n < 1) {
        throw Error(ErrorCode::Domain, "n must be at least 1");
    }
    for (int k : settings.ks) {
        if (k < 1 || k > settings.n) {
            throw Error(ErrorCode::Domain, "k=" + std::to_string(k) + " outside [1, n=" + std::to_string(settings.n) + "]");
        }
    }
    EvalReport report;
    report.task_set_id = settings.task_set_id;
    report.config_fingerprint = settings.config_fingerprint;
    const CallId before = backend.transcript().last_call_id();
    const auto by_name = agent_map(agents);

    for (const auto& task : tasks) {
        if (report.per_task.contains(task.id)) {
            throw Error(ErrorCode::Config, "duplicate task id '" + task.id + "'");
        }
        std::vector<CandidateResult> results;
        try {
            results = sample_candidates(w, by_name, task, backend, settings.n, settings.sandbox, settings.execution);
        } catch (const Error& e) {
            if (!e.is_backend_error()) throw;
            std::cerr << "warning: task " << task.id << " dropped: " << e.what() << "\n";
            report.per_task[task.id] = {0, 0};
            ++report.warnings;
            continue;
        }
        TaskTally tally{settings.n, 0};
        for (const auto& r : results) {
            tally.c += r.passed_all ? 1 : 0;
            report.executable_candidates += (r.extracted && r.syntax_valid) ? 1 : 0;
        }
        report.candidates += results.size();
        report.per_task[task.id] = tally;
    }

    // Means over the id-sorted map so the result ignores task order.
    for (int k : settings.ks) {
        double sum = 0.0;
        int counted = 0;
        for (const auto& [id, t] : report.per_task) {
            if (t.n == 0) continue;
            sum += pass_at_k(t.n, t.c, k);
            ++counted;
        }
        report.pass_at[k] = counted ? sum / counted : 0.0;
    }
    report.token_totals = transcript_totals(backend.transcript().records_since(before));
    return report;
}

WorkflowIR baseline_workflow() {
    WorkflowIR w;
    w.steps.push_back({"code_generation_agent", {std::string(kTaskDescription)}, "generated_code"});
    return w;
}

std::vector<AgentSpec> baseline_agents() {
    return {{"code_generation_agent", std::string(prompts::kCodeGenerationAgent)}};
}

EvalReport baseline_single_agent(const std::vector<TaskInstance>& tasks, CompletionBackend& backend,
                                 const EvalSettings& settings) {
    return evaluate(baseline_workflow(), baseline_agents(), tasks, backend, settings);
}

json to_json(const TokenTotals& totals) {
    json j{{"input_tokens", totals.input_tokens}, {"output_tokens", totals.output_tokens}, {"total", totals.total}};
    json roles = json::object();
    for (const auto& [role, t] : totals.by_role) {
        roles[role] = {{"input_tokens", t.input_tokens}, {"output_tokens", t.output_tokens}, {"total", t.total}};
    }
    j["by_role"] = roles;
    return j;
}

json to_json(const EvalReport& report) {
    json per_task = json::object();
    for (const auto& [id, t] : report.per_task) {
        per_task[id] = {{"n", t.n}, {"c", t.c}};
    }
    json pass_at = json::object();
    for (const auto& [k, v] : report.pass_at) {
        pass_at[std::to_string(k)] = v;
    }
    return {{"task_set_id", report.task_set_id},
            {"per_task", per_task},
            {"pass_at", pass_at},
            {"token_totals", to_json(report.token_totals)},
            {"config_fingerprint", report.config_fingerprint},
            {"warnings", report.warnings},
            {"candidates", report.candidates},
            {"executable_candidates", report.executable_candidates}};
}

json to_json(const RateReport& r) {
    return {{"scheme", to_string(r.scheme)},
            {"total_variants", r.total_variants},
            {"valid_count", r.valid_count},
            {"executable_count", r.executable_count},
            {"lsr", r.lsr},
            {"gsr", r.gsr}};
}

std::string to_csv(const EvalReport& report) {
    std::string out = "task_id,n,c\n";
    for (const auto& [id, t] : report.per_task) {
        out += id + "," + std::to_string(t.n) + "," + std::to_string(t.c) + "\n";
    }
    return out;
}

json merge_reports(const std::map<std::string, EvalReport>& reports) {
    json j = json::object();
    for (const auto& [label, r] : reports) {
        j[label] = to_json(r);
    }
    return j;
}

std::string merged_csv(const std::map<std::string, EvalReport>& reports) {
    std::string out = "label,k,pass\n";
    for (const auto& [label, r] : reports) {
        for (const auto& [k, v] : r.pass_at) {
            out += label + "," + std::to_string(k) + "," + fixed(v) + "\n";
        }
    }
    return out;
}

std::string point_label(Scheme scheme, std::size_t mutation_prompt_id, EvolutionMethod method) {
    return std::string(to_string(scheme)) + "_m" + std::to_string(mutation_prompt_id) + "_" +
           std::string(to_string(method));
}

json diagnosis_json(const InvalidWorkflowError::Diagnosis& diagnosis) {
    if (const auto* failure = std::get_if<ParseFailure>(&diagnosis)) {
        return {{"valid", false},
                {"parse_failure",
                 {{"scheme", to_string(failure->scheme)},
                  {"line", failure->position.line},
                  {"column", failure->position.column},
                  {"kind", failure->kind == FailureKind::Lexical ? "LEXICAL" : "STRUCTURAL"},
                  {"reason", failure->reason}}}};
    }
    const auto& report = std::get<ValidityReport>(diagnosis);
    json violations = json::array();
    for (const auto& v : report.violations) {
        violations.push_back({{"rule", to_string(v.rule)}, {"step_index", v.step_index}, {"detail", v.detail}});
    }
    return {{"valid", report.valid()}, {"violations", violations}};
}

json to_json(const SearchRecord& r) {
    json j{{"scheme", to_string(r.scheme)},
           {"mutation_prompt_id", r.mutation_prompt_id},
           {"method", to_string(r.method)},
           {"validity", r.validity ? diagnosis_json(*r.validity) : json(nullptr)},
           {"error", r.error ? json(*r.error) : json(nullptr)},
           {"validation_score", r.validation_score ? json(*r.validation_score) : json(nullptr)},
           {"executed_ok", r.executed_ok},
           {"tokens", r.tokens},
           {"artifact_path", r.artifact_path}};
    json pass_at = json::object();
    for (const auto& [k, v] : r.pass_at) {
        pass_at[std::to_string(k)] = v;
    }
    j["pass_at"] = pass_at;
    return j;
}

std::string rates_csv(const std::map<Scheme, RateReport>& reports) {
    std::string out = "scheme,total,valid,executable,lsr,gsr\n";
    for (const auto& [scheme, r] : reports) {
        out += std::string(to_string(scheme)) + "," + std::to_string(r.total_variants) + "," +
               std::to_string(r.valid_count) + "," + std::to_string(r.executable_count) + "," + fixed(r.lsr) + "," +
               fixed(r.gsr) + "\n";
    }
    return out;
}

std::string methods_csv(const std::vector<SearchRecord>& records) {
    std::string out = "workflow_fixture,method,pass@1,pass@5,pass@10\n";
    for (const auto& r : records) {
        if (!r.validation_score) continue;
        out += std::string(to_string(r.scheme)) + "/mut" + std::to_string(r.mutation_prompt_id) + "," +
               std::string(to_string(r.method));
        for (int k : {1, 5, 10}) {
            auto it = r.pass_at.find(k);
            out += ",";
            if (it != r.pass_at.end()) out += fixed(it->second);
        }
        out += "\n";
    }
    return out;
}

SearchResult search(const SearchConfig& config, const std::vector<TaskInstance>& validation_tasks,
                    CompletionBackend& backend) {
    if (config.schemes.empty() || config.mutation_prompt_ids.empty() || config.methods.empty()) {
        throw Error(ErrorCode::EmptyInput, "search grid is empty");
    }
    if (validation_tasks.empty()) {
        throw Error(ErrorCode::EmptyInput, "search needs validation tasks");
    }
    EvalSettings eval = config.eval;
    eval.ks.erase(std::remove_if(eval.ks.begin(), eval.ks.end(), [&](int k) { return k < 1 || k > eval.n; }),
                  eval.ks.end());
    if (std::find(eval.ks.begin(), eval.ks.end(), 1) == eval.ks.end()) {
        eval.ks.insert(eval.ks.begin(), 1);
    }

    SearchResult out;
    std::map<Scheme, std::vector<RateVariant>> variants;
    for (Scheme scheme : config.schemes) {
        for (std::size_t prompt_id : config.mutation_prompt_ids) {
            for (EvolutionMethod method : config.methods) {
                SearchRecord rec;
                rec.scheme = scheme;
                rec.mutation_prompt_id = prompt_id;
                rec.method = method;
                rec.artifact_path = "points/" + point_label(scheme, prompt_id, method);
                const CallId before = backend.transcript().last_call_id();
                RateVariant variant;
                variant.doc.scheme = scheme;
                try {
                    CorpusSelection selection{prompt_id, config.hyper_mutation_prompt_id, config.thinking_style_id};
                    SewResult result = run_sew(config.task_desc, config.template_doc, scheme, method, config.corpus,
                                               selection, backend, config.evolution);
                    variant.doc = result.evolved_doc;
                    rec.evolved_doc = result.evolved_doc;
                    rec.validity = ValidityReport{};
                    EvalReport report = evaluate(result.workflow, result.agents, validation_tasks, backend, eval);
                    rec.executed_ok = report.executable_candidates > 0;
                    const bool any_scored = std::any_of(report.per_task.begin(), report.per_task.end(),
                                                        [](const auto& kv) { return kv.second.n > 0; });
                    if (any_scored) {
                        rec.validation_score = report.pass_at.at(1);
                        rec.pass_at = report.pass_at;
                    } else {
                        rec.error = "every validation task failed";
                    }
                    rec.result = std::move(result);
                } catch (const InvalidWorkflowError& e) {
                    variant.doc = e.doc();
                    rec.evolved_doc = e.doc();
                    rec.validity = e.diagnosis();
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::SandboxSetup) throw;
                    rec.error = e.what();
                }
                variant.validity = rec.validity;
                variant.executed_ok = rec.executed_ok;
                variants[scheme].push_back(std::move(variant));
                rec.tokens = transcript_totals(backend.transcript().records_since(before)).total;
                out.records.push_back(std::move(rec));
            }
        }
    }
    for (const auto& [scheme, vs] : variants) {
        out.rate_reports[scheme] = compute_rates(vs);
        out.rate_reports[scheme].scheme = scheme;
    }

    auto key = [](const SearchRecord& r) {
        return std::tuple(std::string(to_string(r.scheme)), r.mutation_prompt_id, std::string(to_string(r.method)));
    };
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& r = out.records[i];
        if (!r.validation_score) continue;
        if (!out.best) {
            out.best = i;
            continue;
        }
        const auto& b = out.records[*out.best];
        const bool better = *r.validation_score > *b.validation_score ||
                            (*r.validation_score == *b.validation_score &&
                             (r.tokens < b.tokens || (r.tokens == b.tokens && key(r) < key(b))));
        if (better) out.best = i;
    }
    return out;
}

}  // namespace sew
