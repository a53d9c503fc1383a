#include "sew/workflow.hpp"

#include <algorithm>
#include <unordered_set>

#include "sew/errors.hpp"

namespace sew {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Unbound: return "UNBOUND";
    case ErrorCode::Unserializable: return "UNSERIALIZABLE";
    case ErrorCode::Network: return "NETWORK";
    case ErrorCode::ReplayMiss: return "REPLAY_MISS";
    case ErrorCode::Quota: return "QUOTA";
    case ErrorCode::MalformedResponse: return "MALFORMED_RESPONSE";
    case ErrorCode::EmptyCompletion: return "EMPTY_COMPLETION";
    case ErrorCode::MissingAgent: return "MISSING_AGENT";
    case ErrorCode::InvalidWorkflow: return "INVALID_WORKFLOW";
    case ErrorCode::NoCodeFound: return "NO_CODE_FOUND";
    case ErrorCode::SandboxSetup: return "SANDBOX_SETUP";
    case ErrorCode::Domain: return "DOMAIN";
    case ErrorCode::EmptyInput: return "EMPTY_INPUT";
    case ErrorCode::Config: return "CONFIG";
    }
    return "UNKNOWN";
}

std::string_view to_string(Rule rule) {
    switch (rule) {
    case Rule::Empty: return "EMPTY";
    case Rule::DuplicateOutput: return "DUPLICATE_OUTPUT";
    case Rule::UnboundArg: return "UNBOUND_ARG";
    case Rule::NonterminalCoder: return "NONTERMINAL_CODER";
    case Rule::BadToken: return "BAD_TOKEN";
    }
    return "UNKNOWN";
}

bool ValidityReport::has(Rule rule) const {
    return std::any_of(violations.begin(), violations.end(),
                       [rule](const Violation& v) { return v.rule == rule; });
}

bool CodeProducerNames::matches(std::string_view agent_name) const {
    return std::any_of(substrings.begin(), substrings.end(), [&](const std::string& s) {
        return agent_name.find(s) != std::string_view::npos;
    });
}

bool is_identifier(std::string_view token) {
    if (token.empty() || token.front() < 'a' || token.front() > 'z') {
        return false;
    }
    return std::all_of(token.begin(), token.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

ValidityReport validate(const WorkflowIR& workflow, const CodeProducerNames& producers) {
    ValidityReport report;
    auto& out = report.violations;
    if (workflow.steps.empty()) {
        out.push_back({Rule::Empty, -1, "workflow has no steps"});
        return report;
    }

    std::unordered_set<std::string> bound{std::string(kTaskDescription)};
    for (std::size_t i = 0; i < workflow.steps.size(); ++i) {
        const auto& step = workflow.steps[i];
        const int idx = static_cast<int>(i);
        if (!is_identifier(step.name)) {
            out.push_back({Rule::BadToken, idx, "agent name '" + step.name + "'"});
        }
        if (!is_identifier(step.output)) {
            out.push_back({Rule::BadToken, idx, "output '" + step.output + "'"});
        }
        for (const auto& arg : step.args) {
            if (!is_identifier(arg)) {
                out.push_back({Rule::BadToken, idx, "arg '" + arg + "'"});
            }
        }
        if (bound.contains(step.output)) {
            out.push_back({Rule::DuplicateOutput, idx, "output '" + step.output + "' already bound"});
        }
        for (const auto& arg : step.args) {
            if (!bound.contains(arg)) {
                out.push_back({Rule::UnboundArg, idx,
                               "arg '" + arg + "' of " + step.name + " is not produced by an earlier step"});
            }
        }
        bound.insert(step.output);
    }

    const auto& last = workflow.steps.back();
    if (!producers.matches(last.name)) {
        out.push_back({Rule::NonterminalCoder, static_cast<int>(workflow.steps.size() - 1),
                       "terminal agent '" + last.name + "' does not produce code"});
    }
    return report;
}

std::vector<std::size_t> topo_order(const WorkflowIR& workflow) {
    if (workflow.steps.empty()) {
        throw Error(ErrorCode::Unbound, "empty workflow has no execution order");
    }
    std::unordered_set<std::string> bound{std::string(kTaskDescription)};
    std::vector<std::size_t> order;
    order.reserve(workflow.steps.size());
    for (std::size_t i = 0; i < workflow.steps.size(); ++i) {
        const auto& step = workflow.steps[i];
        for (const auto& arg : step.args) {
            if (!bound.contains(arg)) {
                throw Error(ErrorCode::Unbound, "step " + std::to_string(i) + " (" + step.name +
                                                    ") cannot fetch input '" + arg + "'");
            }
        }
        if (!bound.insert(step.output).second) {
            throw Error(ErrorCode::Unbound, "step " + std::to_string(i) + " rebinds '" + step.output + "'");
        }
        order.push_back(i);
    }
    return order;
}

std::vector<std::string> agent_names(const WorkflowIR& workflow) {
    std::vector<std::string> names;
    for (const auto& step : workflow.steps) {
        if (std::find(names.begin(), names.end(), step.name) == names.end()) {
            names.push_back(step.name);
        }
    }
    return names;
}

}  // namespace sew
