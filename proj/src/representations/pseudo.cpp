// Pseudo-code: one `name(arg, arg) -> output` call per line.

#include <cctype>

#include "sew/representations.hpp"

namespace sew::detail {
namespace {

constexpr std::string_view kReserved = "(),#>";

bool is_word(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) || kReserved.find(c) != std::string_view::npos) {
            return false;
        }
    }
    return true;
}

std::size_t skip_spaces(std::string_view s, std::size_t i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) {
        ++i;
    }
    return i;
}

std::size_t trim_end(std::string_view s, std::size_t end) {
    while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\r')) {
        --end;
    }
    return end;
}

StepSpec parse_call(std::string_view src, std::string_view line, std::size_t base) {
    auto err = [&](std::size_t at, FailureKind kind, std::string reason) -> void {
        fail(Scheme::Pseudo, src, base + at, kind, std::move(reason));
    };
    StepSpec step;
    const std::size_t start = skip_spaces(line, 0);
    const std::size_t open = line.find('(', start);
    if (open == std::string_view::npos) {
        err(start, FailureKind::Structural, "expected 'name(args) -> output'");
    }
    const std::string_view name = line.substr(start, trim_end(line, open) - start);
    if (!is_word(name)) {
        err(start, FailureKind::Lexical, "invalid agent name");
    }
    step.name = std::string(name);

    const std::size_t close = line.find(')', open + 1);
    if (close == std::string_view::npos) {
        err(open, FailureKind::Structural, "unclosed '('");
    }
    std::string_view inner = line.substr(open + 1, close - open - 1);
    if (skip_spaces(inner, 0) == inner.size()) {
        inner = {};
    }
    if (!inner.empty()) {
        std::size_t pos = 0;
        while (true) {
            const std::size_t comma = inner.find(',', pos);
            const std::size_t end = comma == std::string_view::npos ? inner.size() : comma;
            const std::size_t a = skip_spaces(inner, pos);
            const std::string_view arg = inner.substr(a, trim_end(inner, end) > a ? trim_end(inner, end) - a : 0);
            if (!is_word(arg)) {
                err(open + 1 + a, FailureKind::Lexical, "invalid argument");
            }
            step.args.emplace_back(arg);
            if (comma == std::string_view::npos) {
                break;
            }
            pos = comma + 1;
        }
    }

    std::size_t i = skip_spaces(line, close + 1);
    if (line.substr(i, 2) != "->") {
        err(i, FailureKind::Structural, "expected '->' after ')'");
    }
    i = skip_spaces(line, i + 2);
    const std::string_view output = line.substr(i, trim_end(line, line.size()) - i);
    if (!is_word(output)) {
        err(i, FailureKind::Lexical, "invalid output name");
    }
    step.output = std::string(output);
    return step;
}

}  // namespace

WorkflowIR parse_pseudo(std::string_view text) {
    WorkflowIR ir;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            ir.steps.push_back(parse_call(text, line, pos));
        }
        pos = eol + 1;
    }
    return ir;
}

std::string serialize_pseudo(const WorkflowIR& workflow) {
    require_writable(workflow, Scheme::Pseudo, kReserved);
    std::string out;
    for (const auto& step : workflow.steps) {
        out += step.name + "(";
        for (std::size_t i = 0; i < step.args.size(); ++i) {
            out += (i ? ", " : "") + step.args[i];
        }
        out += ") -> " + step.output + "\n";
    }
    return out;
}

}  // namespace sew::detail
