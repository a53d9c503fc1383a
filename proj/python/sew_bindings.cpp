#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sew/cli.hpp"

namespace py = pybind11;
using namespace sew;

namespace {

Scheme scheme_arg(const std::string& tag) {
    auto s = scheme_from_string(tag);
    if (!s) throw py::value_error("unknown scheme '" + tag + "'");
    return *s;
}

EvolutionMethod method_arg(const std::string& tag) {
    auto m = method_from_string(tag);
    if (!m) throw py::value_error("unknown evolution method '" + tag + "'");
    return *m;
}

py::object json_to_py(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

std::string transcript_jsonl(const CompletionBackend& b) {
    std::string out;
    for (const auto& r : b.transcript().records()) out += to_json(r).dump() + "\n";
    return out;
}

py::dict candidate_dict(const CandidateResult& r) {
    py::list verdicts;
    for (auto v : r.verdicts) verdicts.append(std::string(to_string(v)));
    py::dict d;
    d["code"] = r.code;
    d["verdicts"] = verdicts;
    d["passed_all"] = r.passed_all;
    d["syntax_valid"] = r.syntax_valid;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Workflow representations, evolution operators, sandboxed evaluation";

    py::register_exception<Error>(m, "SewError");
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<StepSpec>(m, "StepSpec")
        .def(py::init<std::string, std::vector<std::string>, std::string>(), py::arg("name"), py::arg("args"),
             py::arg("output"))
        .def_readwrite("name", &StepSpec::name)
        .def_readwrite("args", &StepSpec::args)
        .def_readwrite("output", &StepSpec::output)
        .def(py::self == py::self)
        .def("__repr__", [](const StepSpec& s) {
            std::string args;
            for (const auto& a : s.args) args += (args.empty() ? "" : ", ") + a;
            return s.name + "(" + args + ") -> " + s.output;
        });

    py::class_<WorkflowIR>(m, "WorkflowIR")
        .def(py::init([](std::vector<StepSpec> steps) { return WorkflowIR{std::move(steps), std::nullopt}; }),
             py::arg("steps"))
        .def_readwrite("steps", &WorkflowIR::steps)
        .def(py::self == py::self)
        .def("__len__", [](const WorkflowIR& w) { return w.steps.size(); });

    m.def("schemes", [] {
        std::vector<std::string> out;
        for (auto s : kAllSchemes) out.emplace_back(to_string(s));
        return out;
    });
    m.def("parse", [](const std::string& text, const std::string& scheme) { return parse({text, scheme_arg(scheme)}); },
          py::arg("text"), py::arg("scheme"));
    m.def("serialize", [](const WorkflowIR& w, const std::string& scheme) { return serialize(w, scheme_arg(scheme)).text; },
          py::arg("workflow"), py::arg("scheme"));
    m.def("transcode",
          [](const std::string& text, const std::string& from, const std::string& to) {
              return transcode({text, scheme_arg(from)}, scheme_arg(to)).text;
          },
          py::arg("text"), py::arg("source"), py::arg("target"));
    m.def("validate", [](const WorkflowIR& w) {
        py::list out;
        for (const auto& v : validate(w).violations) {
            out.append(py::make_tuple(std::string(to_string(v.rule)), v.step_index, v.detail));
        }
        return out;
    });
    m.def("default_template", &default_template_ir);

    m.def("pass_at_k", &pass_at_k, py::arg("n"), py::arg("c"), py::arg("k"));
    m.def("compute_rates", [](const std::vector<std::pair<bool, bool>>& variants) {
        std::vector<RateVariant> vs;
        for (auto [valid, executed] : variants) {
            RateVariant v;
            ValidityReport report;
            if (!valid) report.violations.push_back({Rule::Empty, -1, "marked invalid"});
            v.validity = report;
            v.executed_ok = executed;
            vs.push_back(std::move(v));
        }
        return json_to_py(to_json(compute_rates(vs)));
    }, py::arg("variants"), "variants: list of (valid, executed_ok) pairs");

    m.def("extract_code", [](const std::string& text) { return extract_code(text); });
    m.def("assemble_prompt",
          [](const std::string& prompt, const StepSpec& step, const std::map<std::string, std::string>& bindings,
             const std::string& sep) { return assemble_prompt({step.name, prompt}, step, bindings, sep); },
          py::arg("prompt"), py::arg("step"), py::arg("bindings"), py::arg("separator") = "\n\n");

    m.def("run_candidate",
          [](const std::string& code, const std::string& task_json, std::int64_t wall_timeout_ms) {
              auto tasks = parse_tasks(task_json, "sew");
              if (tasks.size() != 1) throw py::value_error("expected exactly one task line");
              SandboxPolicy policy;
              policy.wall_timeout_ms = wall_timeout_ms;
              CandidateResult r;
              {
                  py::gil_scoped_release release;
                  r = run_candidate(code, tasks.front(), policy);
              }
              return candidate_dict(r);
          },
          py::arg("code"), py::arg("task_json"), py::arg("wall_timeout_ms") = 10000);

    py::class_<CompletionBackend>(m, "CompletionBackend")
        .def("transcript_jsonl", &transcript_jsonl)
        .def("call_count", [](const CompletionBackend& b) { return b.transcript().size(); });
    py::class_<EchoBackend, CompletionBackend>(m, "EchoBackend").def(py::init<>());
    py::class_<ScriptedBackend, CompletionBackend>(m, "ScriptedBackend")
        .def(py::init([](std::function<std::string(std::string)> fn) {
                 return std::make_unique<ScriptedBackend>(
                     ScriptedBackend::TextFn([fn](const CompletionRequest& r) {
                         py::gil_scoped_acquire gil;
                         return fn(r.prompt);
                     }));
             }),
             py::arg("fn"), "fn maps a prompt to a completion")
        .def_static("from_rules", [](const std::string& table) {
            return ScriptedBackend::from_rules(nlohmann::json::parse(table));
        });
    py::class_<ReplayBackend, CompletionBackend>(m, "ReplayBackend")
        .def(py::init([](const std::string& path) { return std::make_unique<ReplayBackend>(read_transcript(path)); }),
             py::arg("transcript_path"));

    m.def("run_sew",
          [](const std::string& task_desc, const std::string& template_text, const std::string& template_scheme,
             const std::string& scheme, const std::string& method, const std::string& corpus_text,
             std::size_t mutation_prompt_id, std::size_t hyper_mutation_prompt_id, std::size_t thinking_style_id,
             CompletionBackend& backend) {
              const PromptCorpus corpus = parse_corpus(corpus_text);
              SewResult r = run_sew(task_desc, {template_text, scheme_arg(template_scheme)}, scheme_arg(scheme),
                                    method_arg(method), corpus,
                                    {mutation_prompt_id, hyper_mutation_prompt_id, thinking_style_id}, backend);
              py::dict agents;
              for (const auto& a : r.agents) agents[py::str(a.name)] = a.prompt;
              py::list lineage;
              for (const auto& a : r.lineage) {
                  py::dict e;
                  e["subject"] = a.subject;
                  e["method"] = std::string(to_string(a.method));
                  e["call_ids"] = a.call_ids;
                  e["after"] = a.after;
                  lineage.append(e);
              }
              py::dict out;
              out["default_doc"] = r.default_doc.text;
              out["evolved_doc"] = r.evolved_doc.text;
              out["workflow"] = r.workflow;
              out["agents"] = agents;
              out["lineage"] = lineage;
              return out;
          },
          py::arg("task_description"), py::arg("template_text"), py::arg("template_scheme"), py::arg("scheme"),
          py::arg("method"), py::arg("corpus_text"), py::arg("mutation_prompt_id") = 0,
          py::arg("hyper_mutation_prompt_id") = 0, py::arg("thinking_style_id") = 0, py::arg("backend"));

    m.def("run_command",
          [](const std::string& command, const std::string& config_path, std::optional<std::string> out,
             std::optional<std::int64_t> seed, bool baseline) {
              std::ostringstream log;
              int code;
              try {
                  RunConfig config = load_config(config_path);
                  if (out) config.output_dir = *out;
                  if (seed) config.seed = *seed;
                  py::gil_scoped_release release;
                  code = run_command(command, config, baseline, nullptr, log);
              } catch (const Error& e) {
                  log << "error: " << e.what() << "\n";
                  code = exit_code_for(e);
              }
              return py::make_tuple(code, log.str());
          },
          py::arg("command"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
          py::arg("baseline") = false, "Returns (exit_code, log)");
}
