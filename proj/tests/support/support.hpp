#pragma once

// Shared fixtures and independent oracles for unit and acceptance tests.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <set>
#include <functional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sew/cli.hpp"
#include "sew/prompts.hpp"

namespace sew::testing {

inline std::filesystem::path data_dir() {
    return SEW_DATA_DIR;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

// ---------------------------------------------------------------- generators

inline std::string random_identifier(std::mt19937_64& rng) {
    static const std::string head = "abcdefghijklmnopqrstuvwxyz";
    static const std::string tail = "abcdefghijklmnopqrstuvwxyz0123456789_";
    std::uniform_int_distribution<int> len(0, 10);
    std::string s(1, head[rng() % head.size()]);
    for (int i = len(rng); i > 0; --i) s += tail[rng() % tail.size()];
    return s;
}

/// A valid IR with 1..max_steps steps: fresh outputs, args drawn from the
/// bound set, code-producing terminal step.
inline WorkflowIR random_valid_ir(std::mt19937_64& rng, int max_steps = 8) {
    static const char* producers[] = {"code_generation_agent", "code_refinement_agent", "code_rewriting_agent",
                                      "final_code_generation", "x_code_rewriting_y"};
    std::uniform_int_distribution<int> steps_dist(1, max_steps);
    const int n = steps_dist(rng);
    WorkflowIR w;
    std::vector<std::string> bound{std::string(kTaskDescription)};
    std::set<std::string> used{std::string(kTaskDescription)};
    for (int i = 0; i < n; ++i) {
        StepSpec s;
        s.name = i == n - 1 ? producers[rng() % 5] : random_identifier(rng);
        const int nargs = static_cast<int>(rng() % 4);
        for (int a = 0; a < nargs; ++a) s.args.push_back(bound[rng() % bound.size()]);
        do {
            s.output = random_identifier(rng);
        } while (used.contains(s.output));
        used.insert(s.output);
        bound.push_back(s.output);
        w.steps.push_back(std::move(s));
    }
    return w;
}

/// Arbitrary, often broken IR: bad tokens, unbound args, duplicate outputs,
/// non-coding terminal steps, occasionally empty.
inline WorkflowIR random_any_ir(std::mt19937_64& rng) {
    if (rng() % 50 == 0) return {};
    WorkflowIR w = random_valid_ir(rng, 6);
    static const char* bad[] = {"", "Bad", "9lives", "has space", "dash-ed", "x.y", "TASK"};
    for (auto& s : w.steps) {
        switch (rng() % 10) {
        case 0: s.name = bad[rng() % 7]; break;
        case 1: s.output = bad[rng() % 7]; break;
        case 2: s.args.push_back(random_identifier(rng)); break;  // likely unbound
        case 3: s.output = std::string(kTaskDescription); break;
        case 4: s.args.push_back(bad[rng() % 7]); break;
        default: break;
        }
    }
    if (w.steps.size() > 1 && rng() % 4 == 0) {
        auto& later = w.steps[1 + rng() % (w.steps.size() - 1)];
        later.output = w.steps[0].output;  // duplicate output
    }
    if (rng() % 4 == 0) w.steps.back().name = random_identifier(rng);
    if (rng() % 5 == 0 && w.steps.size() > 1) std::swap(w.steps.front(), w.steps.back());
    return w;
}

// ------------------------------------------------------------------- oracles

/// Rule checker written from the rule statements, one rule at a time.
inline std::vector<std::pair<Rule, int>> brute_force_rules(const WorkflowIR& w) {
    std::vector<std::pair<Rule, int>> out;
    if (w.steps.empty()) {
        out.emplace_back(Rule::Empty, -1);
        return out;
    }
    static const std::regex ident("[a-z][a-z0-9_]*");
    auto earlier_outputs = [&](std::size_t i) {
        std::vector<std::string> o{"task_description"};
        for (std::size_t j = 0; j < i; ++j) o.push_back(w.steps[j].output);
        return o;
    };
    for (std::size_t i = 0; i < w.steps.size(); ++i) {
        const auto& s = w.steps[i];
        std::vector<std::string> tokens{s.name, s.output};
        tokens.insert(tokens.end(), s.args.begin(), s.args.end());
        for (const auto& t : tokens) {
            if (!std::regex_match(t, ident)) out.emplace_back(Rule::BadToken, static_cast<int>(i));
        }
    }
    for (std::size_t i = 0; i < w.steps.size(); ++i) {
        const auto prev = earlier_outputs(i);
        if (std::count(prev.begin(), prev.end(), w.steps[i].output) > 0) {
            out.emplace_back(Rule::DuplicateOutput, static_cast<int>(i));
        }
        for (const auto& a : w.steps[i].args) {
            if (std::count(prev.begin(), prev.end(), a) == 0) out.emplace_back(Rule::UnboundArg, static_cast<int>(i));
        }
    }
    const std::string& last = w.steps.back().name;
    const bool coder = last.find("code_generation") != std::string::npos ||
                       last.find("code_refinement") != std::string::npos ||
                       last.find("code_rewriting") != std::string::npos;
    if (!coder) out.emplace_back(Rule::NonterminalCoder, static_cast<int>(w.steps.size()) - 1);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::pair<Rule, int>> rule_pairs(const ValidityReport& r) {
    std::vector<std::pair<Rule, int>> out;
    for (const auto& v : r.violations) out.emplace_back(v.rule, v.step_index);
    std::sort(out.begin(), out.end());
    return out;
}

/// pass@k by enumerating every k-subset of n candidates (c correct).
inline double pass_at_k_enumerated(int n, int c, int k) {
    std::vector<int> pick(static_cast<std::size_t>(n), 0);
    std::fill(pick.end() - k, pick.end(), 1);
    long long total = 0, hit = 0;
    do {
        ++total;
        bool any = false;
        for (int i = 0; i < c; ++i) any = any || pick[static_cast<std::size_t>(i)];
        hit += any ? 1 : 0;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return static_cast<double>(hit) / static_cast<double>(total);
}

// ------------------------------------------------------------ desk fixtures

struct DeskSolution {
    std::string id;
    std::string description_marker;  // unique substring of the task text
    std::string code;
};

inline const std::vector<DeskSolution>& desk_solutions() {
    static const std::vector<DeskSolution> s = {
        {"square", "print n squared", "n = int(input())\nprint(n * n)\n"},
        {"sum_list", "Print their sum", "input()\nprint(sum(map(int, input().split())))\n"},
        {"reverse_words", "words in reverse order", "print(' '.join(input().split()[::-1]))\n"},
        {"count_vowels", "how many vowels", "print(sum(ch in 'aeiou' for ch in input()))\n"},
        {"fibonacci", "Fibonacci number",
         "n = int(input())\na, b = 0, 1\nfor _ in range(n):\n    a, b = b, a + b\nprint(a)\n"},
    };
    return s;
}

inline std::string fenced(const std::string& code) {
    return "```python\n" + code + "```\n";
}

inline const DeskSolution* desk_task_in(const std::string& prompt) {
    for (const auto& s : desk_solutions()) {
        if (prompt.find(s.description_marker) != std::string::npos) return &s;
    }
    return nullptr;
}

/// Detects the scheme of a workflow document embedded in a prompt.
inline Scheme scheme_in(const std::string& text) {
    if (text.find("<process") != std::string::npos) return Scheme::Bpmn;
    if (text.find(":: process::") != std::string::npos) return Scheme::Core;
    if (text.find("steps = [") != std::string::npos) return Scheme::PySteps;
    if (text.find("- name:") != std::string::npos) return Scheme::Yaml;
    return Scheme::Pseudo;
}

inline WorkflowIR task_parsing_ir() {
    WorkflowIR w;
    w.steps = {{"task_parsing_agent", {"task_description"}, "parsed_task"},
               {"code_generation_agent", {"task_description", "parsed_task"}, "generated_code"}};
    return w;
}

/// A deterministic stand-in for a model that understands the pipeline:
/// emits the task-parsing workflow, keeps it under mutation (except for
/// mutation prompt `broken_mutation`, which breaks it), writes agent
/// prompts, and answers code-generation calls with desk solutions that are
/// correct when `correct(task_index, seed)` holds.
struct DeskModel {
    std::vector<std::string> mutation_prompts;
    std::string broken_mutation;
    std::function<bool(std::size_t task, std::int64_t seed, bool parsed)> correct = [](auto, auto, bool) {
        return true;
    };

    std::string operator()(const CompletionRequest& req) const {
        const std::string& p = req.prompt;
        if (p.rfind(std::string(prompts::kWorkflowGeneration).substr(0, 40), 0) == 0) {
            return fenced(serialize(task_parsing_ir(), scheme_in(p)).text);
        }
        if (p.rfind(std::string(prompts::kAgentGeneration).substr(0, 40), 0) == 0) {
            const auto at = p.rfind("agent named ");
            const std::string name = p.substr(at + 12, p.find(' ', at + 12) - at - 12);
            return "You are " + name + ". Do your part of the pipeline carefully.";
        }
        if (p.find("== task_description ==") != std::string::npos) {
            if (p.find("== parsed_task ==") == std::string::npos && p.rfind("You are task_parsing_agent", 0) == 0) {
                return "Parsed: inputs and outputs identified.";
            }
            const DeskSolution* s = desk_task_in(p);
            if (!s) return "I cannot help with that.";
            const auto& all = desk_solutions();
            const std::size_t idx = static_cast<std::size_t>(s - all.data());
            const bool parsed = p.find("== parsed_task ==") != std::string::npos;
            return correct(idx, req.seed.value_or(0), parsed) ? fenced(s->code) : fenced("print('wrong')\n");
        }
        for (const auto& m : mutation_prompts) {
            if (p.rfind(m + "\n\n", 0) == 0) {
                const std::string payload = p.substr(m.size() + 2);
                const bool workflow_doc = payload.find("You are") == std::string::npos;
                if (m == broken_mutation && workflow_doc) {
                    WorkflowIR w = task_parsing_ir();
                    w.steps[1].args.push_back("missing_input");
                    return serialize(w, scheme_in(payload)).text;
                }
                return payload;
            }
        }
        // Hyper-evolution: first call synthesizes an instruction, second applies it.
        if (const auto at = p.find("You are "); at != std::string::npos) {
            return p.substr(at);
        }
        return "Rewrite the prompt so that it is precise.";
    }
};

}  // namespace sew::testing
