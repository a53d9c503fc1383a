#include <openssl/evp.h>

#include <fstream>
#include <set>
#include <sstream>

#include "sew/cli.hpp"
#include "sew/prompts.hpp"

namespace sew {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& what) {
    throw Error(ErrorCode::Config, what);
}

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) bad(where + " must be an object");
    std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) bad("unknown key '" + k + "' in " + where);
    }
}

template <typename T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        bad(where + "." + key + " has the wrong type");
    }
}

std::string existing(const fs::path& base, const std::string& path, const std::string& what) {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_relative()) p = base / p;
    p = p.lexically_normal();
    if (!fs::exists(p)) bad(what + " not found: " + p.string());
    return p.string();
}

Scheme scheme_of(const std::string& tag, const std::string& where) {
    auto s = scheme_from_string(tag);
    if (!s) bad(where + ": unknown scheme '" + tag + "'");
    return *s;
}

std::vector<std::string> command_line(const json& j, const std::string& where) {
    if (j.is_string()) {
        std::istringstream in(j.get<std::string>());
        std::vector<std::string> out;
        std::string w;
        while (in >> w) out.push_back(w);
        return out;
    }
    if (j.is_array()) {
        try {
            return j.get<std::vector<std::string>>();
        } catch (const json::exception&) {
        }
    }
    bad(where + " must be a string or a list of strings");
}

std::string hex(const unsigned char* data, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += digits[data[i] >> 4];
        out += digits[data[i] & 15];
    }
    return out;
}

}  // namespace

RunConfig parse_config(const json& j, const fs::path& base_dir) {
    allow_keys(j, "config",
               {"dataset", "task_description", "dataset_id", "template", "schemes", "corpus", "methods", "backend",
                "sandbox", "n", "ks", "max_iterations", "output_dir", "seed", "workflow"});
    RunConfig c;

    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        allow_keys(d, "dataset", {"path", "format", "split", "validation_split"});
        c.dataset.path = existing(base_dir, get<std::string>(d, "path", "dataset", ""), "dataset file");
        c.dataset.format = get<std::string>(d, "format", "dataset", "sew");
        c.dataset.split = get<std::string>(d, "split", "dataset", "");
        c.dataset.validation_split = get<std::string>(d, "validation_split", "dataset", "");
    }
    c.task_description = get<std::string>(j, "task_description", "config", "");
    c.dataset_id = get<std::string>(j, "dataset_id", "config", "");

    if (j.contains("template")) {
        const json& t = j["template"];
        allow_keys(t, "template", {"path", "scheme"});
        c.template_path = existing(base_dir, get<std::string>(t, "path", "template", ""), "template file");
        if (t.contains("scheme")) c.template_scheme = scheme_of(t["scheme"].get<std::string>(), "template.scheme");
    }
    if (j.contains("schemes")) {
        c.schemes.clear();
        for (const auto& s : j["schemes"]) c.schemes.push_back(scheme_of(s.get<std::string>(), "schemes"));
        if (c.schemes.empty()) bad("schemes must not be empty");
    }
    if (j.contains("corpus")) {
        const json& k = j["corpus"];
        allow_keys(k, "corpus", {"path", "mutation_prompt_ids", "hyper_mutation_prompt_id", "thinking_style_id"});
        c.corpus_path = existing(base_dir, get<std::string>(k, "path", "corpus", ""), "corpus file");
        c.mutation_prompt_ids = get<std::vector<std::size_t>>(k, "mutation_prompt_ids", "corpus", {0});
        if (c.mutation_prompt_ids.empty()) bad("corpus.mutation_prompt_ids must not be empty");
        c.hyper_mutation_prompt_id = get<std::size_t>(k, "hyper_mutation_prompt_id", "corpus", 0);
        c.thinking_style_id = get<std::size_t>(k, "thinking_style_id", "corpus", 0);
    }
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j["methods"]) {
            auto method = method_from_string(m.get<std::string>());
            if (!method) bad("unknown evolution method '" + m.get<std::string>() + "'");
            c.methods.push_back(*method);
        }
        if (c.methods.empty()) bad("methods must not be empty");
    }
    if (j.contains("backend")) {
        const json& b = j["backend"];
        allow_keys(b, "backend",
                   {"kind", "endpoint", "model", "evolution_temperature", "inference_temperature", "max_tokens",
                    "retries", "timeout_seconds", "transcript", "script", "script_path"});
        auto& bc = c.backend;
        bc.kind = get<std::string>(b, "kind", "backend", bc.kind);
        if (bc.kind != "live" && bc.kind != "replay" && bc.kind != "scripted" && bc.kind != "echo") {
            bad("backend.kind must be live, replay, scripted or echo");
        }
        bc.endpoint = get<std::string>(b, "endpoint", "backend", bc.endpoint);
        bc.model = get<std::string>(b, "model", "backend", bc.model);
        bc.evolution_temperature = get<double>(b, "evolution_temperature", "backend", bc.evolution_temperature);
        bc.inference_temperature = get<double>(b, "inference_temperature", "backend", bc.inference_temperature);
        bc.max_tokens = get<int>(b, "max_tokens", "backend", bc.max_tokens);
        bc.retries = get<int>(b, "retries", "backend", bc.retries);
        bc.timeout_seconds = get<int>(b, "timeout_seconds", "backend", bc.timeout_seconds);
        bc.transcript = existing(base_dir, get<std::string>(b, "transcript", "backend", ""), "replay transcript");
        bc.script_path = existing(base_dir, get<std::string>(b, "script_path", "backend", ""), "backend script");
        if (b.contains("script")) bc.script = b["script"];
        if (bc.kind == "replay" && bc.transcript.empty()) bad("backend.transcript is required for replay");
        if (bc.kind == "scripted" && bc.script.is_null() && bc.script_path.empty()) {
            bad("backend.script or backend.script_path is required for scripted");
        }
        if (bc.max_tokens < 1 || bc.retries < 0 || bc.timeout_seconds < 1) bad("backend limits out of range");
    }
    if (j.contains("sandbox")) {
        const json& s = j["sandbox"];
        allow_keys(s, "sandbox",
                   {"interpreter_command", "syntax_check_command", "wall_timeout_ms", "max_output_bytes", "parallelism",
                    "workdir_isolation"});
        auto& p = c.sandbox;
        if (s.contains("interpreter_command")) {
            p.interpreter_command = command_line(s["interpreter_command"], "sandbox.interpreter_command");
        }
        if (s.contains("syntax_check_command")) {
            p.syntax_check_command = command_line(s["syntax_check_command"], "sandbox.syntax_check_command");
        }
        p.wall_timeout_ms = get<std::int64_t>(s, "wall_timeout_ms", "sandbox", p.wall_timeout_ms);
        p.max_output_bytes = get<std::size_t>(s, "max_output_bytes", "sandbox", p.max_output_bytes);
        p.parallelism = get<int>(s, "parallelism", "sandbox", p.parallelism);
        p.workdir_isolation = get<bool>(s, "workdir_isolation", "sandbox", p.workdir_isolation);
        check_policy(p);
    }
    c.n = get<int>(j, "n", "config", c.n);
    c.ks = get<std::vector<int>>(j, "ks", "config", c.ks);
    c.max_iterations = get<int>(j, "max_iterations", "config", c.max_iterations);
    c.output_dir = get<std::string>(j, "output_dir", "config", c.output_dir);
    c.seed = get<std::int64_t>(j, "seed", "config", c.seed);
    if (c.n < 1) bad("n must be at least 1");
    for (int k : c.ks) {
        if (k < 1 || k > c.n) bad("every k must lie in [1, n]");
    }
    if (c.max_iterations < 1) bad("max_iterations must be at least 1");

    if (j.contains("workflow")) {
        const json& w = j["workflow"];
        allow_keys(w, "workflow", {"path", "scheme", "agents_dir"});
        c.workflow.path = existing(base_dir, get<std::string>(w, "path", "workflow", ""), "workflow file");
        c.workflow.agents_dir = existing(base_dir, get<std::string>(w, "agents_dir", "workflow", ""), "agents directory");
        if (w.contains("scheme")) c.workflow.scheme = scheme_of(w["scheme"].get<std::string>(), "workflow.scheme");
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) bad("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        bad("config file '" + path + "': " + e.what());
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

json resolved_json(const RunConfig& c) {
    json schemes = json::array();
    for (auto s : c.schemes) schemes.push_back(to_string(s));
    json methods = json::array();
    for (auto m : c.methods) methods.push_back(to_string(m));
    const auto& b = c.backend;
    const auto& p = c.sandbox;
    json j;
    j["dataset"] = {{"path", c.dataset.path},
                    {"format", c.dataset.format},
                    {"split", c.dataset.split},
                    {"validation_split", c.dataset.validation_split}};
    j["task_description"] = c.task_description;
    j["dataset_id"] = c.dataset_id;
    j["template"] = {{"path", c.template_path},
                     {"scheme", c.template_scheme ? json(to_string(*c.template_scheme)) : json(nullptr)}};
    j["schemes"] = schemes;
    j["corpus"] = {{"path", c.corpus_path},
                   {"mutation_prompt_ids", c.mutation_prompt_ids},
                   {"hyper_mutation_prompt_id", c.hyper_mutation_prompt_id},
                   {"thinking_style_id", c.thinking_style_id}};
    j["methods"] = methods;
    j["backend"] = {{"kind", b.kind},
                    {"endpoint", b.endpoint},
                    {"model", b.model},
                    {"evolution_temperature", b.evolution_temperature},
                    {"inference_temperature", b.inference_temperature},
                    {"max_tokens", b.max_tokens},
                    {"retries", b.retries},
                    {"timeout_seconds", b.timeout_seconds},
                    {"transcript", b.transcript},
                    {"script", b.script},
                    {"script_path", b.script_path}};
    j["sandbox"] = {{"interpreter_command", p.interpreter_command},
                    {"syntax_check_command", p.syntax_check_command},
                    {"wall_timeout_ms", p.wall_timeout_ms},
                    {"max_output_bytes", p.max_output_bytes},
                    {"parallelism", p.parallelism},
                    {"workdir_isolation", p.workdir_isolation}};
    j["n"] = c.n;
    j["ks"] = c.ks;
    j["max_iterations"] = c.max_iterations;
    j["seed"] = c.seed;
    j["workflow"] = {{"path", c.workflow.path},
                     {"scheme", c.workflow.scheme ? json(to_string(*c.workflow.scheme)) : json(nullptr)},
                     {"agents_dir", c.workflow.agents_dir}};
    return j;
}

std::string config_fingerprint(const RunConfig& config) {
    const std::string text = resolved_json(config).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Config, "SHA-256 unavailable");
    }
    return hex(digest, len);
}

WorkflowIR default_template_ir() {
    WorkflowIR w;
    w.steps = {
        {"task_parsing_agent", {"task_description"}, "parsed_task"},
        {"task_refinement_agent", {"task_description", "parsed_task"}, "refined_task"},
        {"code_generation_agent", {"refined_task"}, "generated_code"},
        {"code_reviewer_agent", {"refined_task", "generated_code"}, "review_comments"},
        {"code_refinement_agent", {"refined_task", "review_comments"}, "refined_code"},
    };
    return w;
}

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& config) {
    const auto& b = config.backend;
    if (b.kind == "echo") {
        return std::make_unique<EchoBackend>();
    }
    if (b.kind == "replay") {
        return std::make_unique<ReplayBackend>(read_transcript(b.transcript));
    }
    if (b.kind == "scripted") {
        json table = b.script;
        if (!b.script_path.empty()) {
            std::ifstream in(b.script_path, std::ios::binary);
            try {
                table = json::parse(in);
            } catch (const json::exception& e) {
                bad("backend script '" + b.script_path + "': " + e.what());
            }
        }
        return ScriptedBackend::from_rules(table);
    }
    LiveBackendConfig live;
    live.endpoint = b.endpoint;
    live.retry_budget = b.retries;
    live.timeout_seconds = b.timeout_seconds;
    return std::make_unique<LiveBackend>(live);
}

std::string resolve_task_description(const RunConfig& config, const PromptCorpus* corpus) {
    if (!config.task_description.empty()) return config.task_description;
    const std::string& id = config.dataset_id;
    if (id.empty()) bad("set task_description or dataset_id");
    if (corpus) {
        auto it = corpus->task_descriptions.find(id);
        if (it != corpus->task_descriptions.end()) return it->second;
    }
    if (id == "livecodebench") return std::string(prompts::kLiveCodeBenchDescription);
    if (id == "humaneval") return std::string(prompts::kHumanEvalDescription);
    if (id == "mbpp") return std::string(prompts::kMbppDescription);
    bad("no task description for dataset_id '" + id + "'");
}

}  // namespace sew
